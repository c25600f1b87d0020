#pragma once

#include <deque>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "prc/linalg.hpp"

namespace prc::sdp {

enum class Status { Optimal, Infeasible, IllConditioned, IterationLimit };

const char* to_string(Status s);

struct Settings {
    double feas_tol = 1e-7;
    double gap_tol = 1e-7;
    long max_iter = 20000;  // total Newton iterations across both phases
    // Trust region |x| < ball_radius on the stacked scalar variables. Both
    // the infeasibility verdict and the optimum are certified within this
    // ball only; a returned point pressing the boundary downgrades the
    // status to IllConditioned. Scale the problem so solutions stay well
    // inside.
    double ball_radius = 1e7;
};

struct Diagnostics {
    long newton_iterations = 0;
    double relative_gap = 0.0;
    double worst_lmi_margin = 0.0;  // min over LMIs of lambda_min / (1 + ||const||)
    double phase1_slack = 0.0;      // final infeasibility slack t
};

struct Solution {
    Status status = Status::IllConditioned;
    double objective = 0.0;
    std::map<int, MatrixXd> values;  // by variable id
    Diagnostics diagnostics;
};

// Objective summand <weight, value(var)> (Frobenius inner product; equals
// trace(weight * value) for symmetric arguments).
struct TraceTerm {
    int var;
    MatrixXd weight;
};

struct VariableDecl {
    bool symmetric;
    int rows, cols;
    std::string name;
};

// One affine PSD constraint assembled from placed blocks. Placements specify
// the lower triangle only (row_off >= col_off); off-diagonal placements are
// mirrored automatically so the expression stays symmetric. Each linear term
// contributes coeff * left * V (or V') * right at its offset; omitted
// multipliers default to identities of the variable's size.
class Lmi {
public:
    struct ConstPlacement {
        int row_off, col_off;
        MatrixXd value;
    };
    struct TermPlacement {
        int row_off, col_off;
        int var;
        std::optional<MatrixXd> left, right;
        double coeff;
        bool transposed;
    };

    explicit Lmi(int dim) : dim_(dim) {}

    Lmi& constant(int row_off, int col_off, MatrixXd m);

    Lmi& term(int row_off, int col_off, int var, std::optional<MatrixXd> left,
              std::optional<MatrixXd> right, double coeff = 1.0, bool transposed = false);

    // Bare variable placement (no multipliers).
    Lmi& var_block(int row_off, int col_off, int var, double coeff = 1.0, bool transposed = false);

    int dim() const { return dim_; }
    const std::vector<ConstPlacement>& constants() const { return constants_; }
    const std::vector<TermPlacement>& terms() const { return terms_; }

private:
    int dim_;
    std::vector<ConstPlacement> constants_;
    std::vector<TermPlacement> terms_;
};

// Linear-objective SDP over symmetric / rectangular matrix variables with
// block-LMI constraints:
//
//   min  sum_i <W_i, V_i> + offset   s.t.  every added Lmi is PSD.
//
// Solved by a log-det barrier interior-point method: phase 1 minimizes a
// uniform slack t added to every LMI until a strictly feasible point is found
// (or infeasibility is certified), phase 2 follows the central path of the
// objective. Fully deterministic and single-threaded per problem instance;
// distinct problems may be solved concurrently. Every Optimal status is
// re-verified post hoc: each LMI at the returned point must have minimum
// eigenvalue >= -feas_tol * (1 + ||constant part||), else the status is
// downgraded. No warm starts.
class Problem {
public:
    int add_symmetric(int n, std::string name);
    int add_rectangular(int rows, int cols, std::string name);

    Lmi& add_lmi(int dim);

    void set_objective_min(std::vector<TraceTerm> terms, double offset = 0.0);

    Solution solve(const Settings& settings = Settings{}) const;

    // Sparse text dump, one line per nonzero coefficient:
    //   <lmi_index> <row> <col> <"const" | v<scalar_index>> <value>
    // followed by objective lines "obj v<scalar_index> <value>". Scalar
    // indices enumerate symmetric variables by their lower triangle in
    // column-major order and rectangular variables column-major, in
    // declaration order.
    void dump(std::ostream& os) const;

    const std::vector<VariableDecl>& variables() const { return vars_; }
    const std::deque<Lmi>& lmis() const { return lmis_; }
    const std::vector<TraceTerm>& objective_terms() const { return objective_; }
    double objective_offset() const { return objective_offset_; }

private:
    std::vector<VariableDecl> vars_;
    std::deque<Lmi> lmis_;
    std::vector<TraceTerm> objective_;
    double objective_offset_ = 0.0;
};

}  // namespace prc::sdp
