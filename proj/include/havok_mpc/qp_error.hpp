#pragma once

#include <string>
#include <utility>

#include "havok_mpc/errors.hpp"
#include "havok_mpc/types.hpp"

namespace havok {

// Thrown by solve_box_qp at the iteration cap; carries the best iterate seen
// so callers can fall back gracefully.
class QpConvergenceError : public NumericError {
public:
    QpConvergenceError(const std::string& msg, Vector best_iterate, double residual)
        : NumericError(msg), best_(std::move(best_iterate)), residual_(residual) {}

    const Vector& best_iterate() const { return best_; }
    double residual() const { return residual_; }

private:
    Vector best_;
    double residual_;
};

}  // namespace havok
