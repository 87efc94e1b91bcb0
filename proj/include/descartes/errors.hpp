#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace descartes {

/// Base class of every error raised by the library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Malformed expression source. `offset` is the byte offset of the offending token.
struct ParseError : Error {
    ParseError(const std::string& msg, std::size_t off)
        : Error("offset " + std::to_string(off) + ": " + msg), offset(off) {}
    std::size_t offset;
};

/// Partial function evaluated outside its domain (log, sqrt, division, pow).
/// `offset` is the source offset of the failing node, or -1 for derived nodes.
struct DomainError : Error {
    DomainError(const std::string& msg, int off)
        : Error(off >= 0 ? msg + " (at offset " + std::to_string(off) + ")" : msg), offset(off) {}
    int offset;
};

struct UnboundSymbol : Error {
    using Error::Error;
};

struct DimensionError : Error {
    using Error::Error;
};

struct MetricNotPositive : Error {
    using Error::Error;
};

/// |det M| fell below the scaled threshold: the coframe degenerates at this point.
struct FrameSingular : Error {
    FrameSingular(const std::string& msg, double det, double sc)
        : Error(msg), upsilon(det), scale(sc) {}
    double upsilon;
    double scale;
};

/// A trajectory came within the guard distance of a coordinate-chart singularity.
struct ChartSingular : Error {
    using Error::Error;
};

/// An internal cross-check failed (a library bug, not a user error).
struct InternalInconsistency : Error {
    using Error::Error;
};

/// The augmented (acceleration, multiplier) system could not be solved.
struct SingularConstraints : Error {
    using Error::Error;
};

struct IntegrationError : Error {
    using Error::Error;
};

struct QuadratureError : Error {
    using Error::Error;
};

struct CatalogError : Error {
    using Error::Error;
};

/// Invalid input to an inverse-problem construction (orthogonality, bracket, domain).
struct InverseError : Error {
    using Error::Error;
};

/// Run-specification error; carries every problem found in one pass.
struct SpecError : Error {
    explicit SpecError(std::vector<std::string> msgs)
        : Error(join(msgs)), messages(std::move(msgs)) {}
    std::vector<std::string> messages;

private:
    static std::string join(const std::vector<std::string>& m) {
        std::string out;
        for (const auto& s : m) {
            if (!out.empty()) out += "\n";
            out += s;
        }
        return out;
    }
};

}  // namespace descartes
