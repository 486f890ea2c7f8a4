#include "omega_grid/errors.hpp"

namespace omega_grid {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Dimension: return "dimension";
        case ErrorKind::Domain: return "domain";
        case ErrorKind::Singular: return "singular";
        case ErrorKind::Infeasible: return "infeasible";
        case ErrorKind::Assumption: return "assumption";
        case ErrorKind::Topology: return "topology";
        case ErrorKind::Reduction: return "reduction";
        case ErrorKind::Construction: return "construction";
        case ErrorKind::Rejection: return "rejection";
        case ErrorKind::Step: return "step";
        case ErrorKind::Config: return "config";
    }
    return "unknown";
}

}  // namespace omega_grid
