#include "prc/sdp.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <ostream>

#include <Eigen/Cholesky>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "prc/errors.hpp"

namespace prc::sdp {

const char* to_string(Status s) {
    switch (s) {
        case Status::Optimal: return "Optimal";
        case Status::Infeasible: return "Infeasible";
        case Status::IllConditioned: return "IllConditioned";
        case Status::IterationLimit: return "IterationLimit";
    }
    return "Unknown";
}

Lmi& Lmi::constant(int row_off, int col_off, MatrixXd m) {
    if (row_off < col_off) throw DomainError("Lmi: place blocks on or below the diagonal");
    if (row_off + m.rows() > dim_ || col_off + m.cols() > dim_)
        throw DomainError("Lmi: constant block exceeds LMI dimension");
    if (row_off == col_off) {
        require_symmetric(m, "Lmi diagonal constant block", 1e-8);
        m = symmetrized(m);
    }
    constants_.push_back({row_off, col_off, std::move(m)});
    return *this;
}

Lmi& Lmi::term(int row_off, int col_off, int var, std::optional<MatrixXd> left,
               std::optional<MatrixXd> right, double coeff, bool transposed) {
    if (row_off < col_off) throw DomainError("Lmi: place blocks on or below the diagonal");
    terms_.push_back({row_off, col_off, var, std::move(left), std::move(right), coeff, transposed});
    return *this;
}

Lmi& Lmi::var_block(int row_off, int col_off, int var, double coeff, bool transposed) {
    return term(row_off, col_off, var, std::nullopt, std::nullopt, coeff, transposed);
}

int Problem::add_symmetric(int n, std::string name) {
    if (n < 1) throw DomainError("add_symmetric: dimension must be >= 1");
    vars_.push_back({true, n, n, std::move(name)});
    return static_cast<int>(vars_.size()) - 1;
}

int Problem::add_rectangular(int rows, int cols, std::string name) {
    if (rows < 1 || cols < 1) throw DomainError("add_rectangular: dimensions must be >= 1");
    vars_.push_back({false, rows, cols, std::move(name)});
    return static_cast<int>(vars_.size()) - 1;
}

Lmi& Problem::add_lmi(int dim) {
    if (dim < 1) throw DomainError("add_lmi: dimension must be >= 1");
    lmis_.emplace_back(dim);
    return lmis_.back();
}

void Problem::set_objective_min(std::vector<TraceTerm> terms, double offset) {
    objective_ = std::move(terms);
    objective_offset_ = offset;
}

namespace {

struct VarLayout {
    bool symmetric;
    int rows, cols;
    int offset;
    int count;
};

int tri_count(int n) { return n * (n + 1) / 2; }

// Scalar components of a symmetric variable enumerate the lower triangle in
// column-major order; rectangular variables enumerate entries column-major.
std::pair<int, int> scalar_entry(const VarLayout& v, int local) {
    if (!v.symmetric) return {local % v.rows, local / v.rows};
    int c = 0;
    int remaining = local;
    while (remaining >= v.rows - c) {
        remaining -= v.rows - c;
        ++c;
    }
    return {c + remaining, c};
}

struct CompiledBlock {
    int dim = 0;
    MatrixXd f0;                                   // normalized by scale
    std::vector<std::pair<int, MatrixXd>> coeffs;  // normalized, sorted by scalar index
    double scale = 1.0;
    double f0_norm_orig = 0.0;
};

struct Compiled {
    int m = 0;
    double nu = 0.0;
    VectorXd c;
    double offset = 0.0;
    std::vector<VarLayout> layout;
    std::vector<CompiledBlock> blocks;
};

// Adds `content` at the placement offsets and keeps the accumulated matrix
// symmetric: off-diagonal placements are mirrored, diagonal ones symmetrized.
void place_symmetrically(MatrixXd& target, int row_off, int col_off, const MatrixXd& content) {
    if (row_off == col_off && content.rows() == content.cols()) {
        target.block(row_off, col_off, content.rows(), content.cols()) +=
            0.5 * (content + content.transpose());
        return;
    }
    target.block(row_off, col_off, content.rows(), content.cols()) += content;
    target.block(col_off, row_off, content.cols(), content.rows()) += content.transpose();
}

Compiled compile_problem(const std::vector<VariableDecl>& vars, const std::deque<Lmi>& lmis,
                         const std::vector<TraceTerm>& objective, double offset) {
    Compiled out;
    out.offset = offset;
    out.layout.reserve(vars.size());
    int cursor = 0;
    for (const auto& v : vars) {
        VarLayout l;
        l.symmetric = v.symmetric;
        l.rows = v.rows;
        l.cols = v.cols;
        l.offset = cursor;
        l.count = v.symmetric ? tri_count(v.rows) : v.rows * v.cols;
        cursor += l.count;
        out.layout.push_back(l);
    }
    out.m = cursor;

    out.c = VectorXd::Zero(out.m);
    for (const auto& t : objective) {
        if (t.var < 0 || t.var >= static_cast<int>(out.layout.size()))
            throw DomainError("sdp objective: unknown variable");
        const VarLayout& l = out.layout[t.var];
        if (t.weight.rows() != l.rows || t.weight.cols() != l.cols)
            throw DomainError("sdp objective: weight shape mismatch");
        for (int k = 0; k < l.count; ++k) {
            const auto [r, c] = scalar_entry(l, k);
            double coeff = t.weight(r, c);
            if (l.symmetric && r != c) coeff += t.weight(c, r);
            out.c[l.offset + k] += coeff;
        }
    }

    for (const auto& lmi : lmis) {
        CompiledBlock blk;
        blk.dim = lmi.dim();
        blk.f0 = MatrixXd::Zero(blk.dim, blk.dim);
        for (const auto& cp : lmi.constants())
            place_symmetrically(blk.f0, cp.row_off, cp.col_off, cp.value);

        std::map<int, MatrixXd> acc;
        for (const auto& term : lmi.terms()) {
            if (term.var < 0 || term.var >= static_cast<int>(out.layout.size()))
                throw DomainError("sdp lmi: unknown variable");
            const VarLayout& l = out.layout[term.var];
            const int er = term.transposed ? l.cols : l.rows;
            const int ec = term.transposed ? l.rows : l.cols;
            const int h = term.left ? static_cast<int>(term.left->rows()) : er;
            const int w = term.right ? static_cast<int>(term.right->cols()) : ec;
            if (term.left && term.left->cols() != er)
                throw DomainError("sdp lmi: left multiplier shape mismatch");
            if (term.right && term.right->rows() != ec)
                throw DomainError("sdp lmi: right multiplier shape mismatch");
            if (term.row_off + h > blk.dim || term.col_off + w > blk.dim)
                throw DomainError("sdp lmi: term exceeds LMI dimension");
            if (term.row_off == term.col_off && h != w)
                throw DomainError("sdp lmi: diagonal placement must be square");

            for (int k = 0; k < l.count; ++k) {
                // Basis element of scalar k: e_r e_c' (+ mirror for symmetric
                // off-diagonal scalars). left * E * right reduces to an outer
                // product of a left column slice and a right row slice.
                const auto [br, bc] = scalar_entry(l, k);
                MatrixXd content = MatrixXd::Zero(h, w);
                auto add_outer = [&](int a, int b) {
                    const int ea = term.transposed ? b : a;
                    const int eb = term.transposed ? a : b;
                    VectorXd lcol = term.left ? VectorXd(term.left->col(ea))
                                              : VectorXd(VectorXd::Unit(h, ea));
                    Eigen::RowVectorXd rrow = term.right
                                                  ? Eigen::RowVectorXd(term.right->row(eb))
                                                  : Eigen::RowVectorXd(Eigen::RowVectorXd::Unit(w, eb));
                    content.noalias() += term.coeff * lcol * rrow;
                };
                add_outer(br, bc);
                if (l.symmetric && br != bc) add_outer(bc, br);
                if (content.cwiseAbs().maxCoeff() == 0.0) continue;

                MatrixXd full = MatrixXd::Zero(blk.dim, blk.dim);
                place_symmetrically(full, term.row_off, term.col_off, content);
                auto it = acc.find(l.offset + k);
                if (it == acc.end())
                    acc.emplace(l.offset + k, std::move(full));
                else
                    it->second += full;
            }
        }

        blk.f0 = symmetrized(blk.f0);
        blk.f0_norm_orig = blk.f0.norm();
        blk.scale = std::max(1.0, blk.f0_norm_orig);
        blk.f0 /= blk.scale;
        blk.coeffs.reserve(acc.size());
        for (auto& [j, mj] : acc) {
            if (mj.cwiseAbs().maxCoeff() == 0.0) continue;
            blk.coeffs.emplace_back(j, mj / blk.scale);
        }
        out.nu += blk.dim;
        out.blocks.push_back(std::move(blk));
    }
    return out;
}

MatrixXd eval_block(const CompiledBlock& b, const VectorXd& x) {
    MatrixXd f = b.f0;
    for (const auto& [j, mj] : b.coeffs) f.noalias() += x[j] * mj;
    return f;
}

bool factorize_all(const Compiled& prob, const VectorXd& x,
                   std::vector<Eigen::LLT<MatrixXd>>& out) {
    out.resize(prob.blocks.size());
    for (std::size_t b = 0; b < prob.blocks.size(); ++b) {
        const MatrixXd f = eval_block(prob.blocks[b], x);
        if (!f.allFinite()) return false;
        out[b].compute(f);
        if (out[b].info() != Eigen::Success) return false;
    }
    return true;
}

double barrier_value(const std::vector<Eigen::LLT<MatrixXd>>& factors) {
    double phi = 0.0;
    for (const auto& llt : factors) {
        const auto& l = llt.matrixLLT();
        for (Eigen::Index i = 0; i < l.rows(); ++i) phi -= 2.0 * std::log(l(i, i));
    }
    return phi;
}

constexpr int kDenseNewtonLimit = 512;

// Damped-Newton central-path follower shared by both phases: minimizes
// c'x/mu - sum_b log det F_b(x) - log(R^2 - |x|^2), shrinking mu
// geometrically after each centering until nu * mu <= gap_tol_rel *
// (1 + |objective|). The trust-region ball -log(R^2 - |x|^2) keeps every
// centering problem bounded; without it, variables that only ever help the
// log-det (phase 1's view of an objective-only-bounded variable) inflate
// without limit and leave phase 2 at a point where gradients underflow.
class BarrierSolver {
public:
    BarrierSolver(const Compiled& prob, const Settings& settings)
        : prob_(prob), settings_(settings) {}

    enum class PathStatus { Converged, EarlyExit, Stalled, IterationLimit, Diverged };

    long newton_used() const { return newton_used_; }

    // -log(R^2 - |x|^2), +infinity outside the ball.
    double ball_term(const VectorXd& x) const {
        const double slack = square(settings_.ball_radius) - x.squaredNorm();
        if (slack <= 0.0) return std::numeric_limits<double>::infinity();
        return -std::log(slack);
    }

    PathStatus follow(VectorXd& x, double mu0, double gap_tol_rel,
                      const std::function<bool(const VectorXd&)>& early_exit) {
        double mu = mu0;
        std::vector<Eigen::LLT<MatrixXd>> factors;
        if (!factorize_all(prob_, x, factors)) return PathStatus::Stalled;
        if (!std::isfinite(ball_term(x))) return PathStatus::Stalled;
        const double initial_obj = std::abs(prob_.c.dot(x));
        const double nu_eff = prob_.nu + 2.0;  // +2 for the ball barrier

        for (int outer = 0; outer < 300; ++outer) {
            for (int inner = 0; inner < 120; ++inner) {
                if (newton_used_ >= settings_.max_iter) return PathStatus::IterationLimit;

                VectorXd grad, step;
                if (!newton_direction(factors, x, mu, grad, step)) return PathStatus::Stalled;
                const double decrement = std::sqrt(std::max(0.0, -grad.dot(step)));
                if (decrement <= 0.1) break;

                const double f_cur = prob_.c.dot(x) / mu + barrier_value(factors) + ball_term(x);
                const double slope = grad.dot(step);
                double alpha = 1.0;
                bool accepted = false;
                for (int ls = 0; ls < 60; ++ls) {
                    const VectorXd x_try = x + alpha * step;
                    std::vector<Eigen::LLT<MatrixXd>> trial;
                    if (factorize_all(prob_, x_try, trial)) {
                        const double f_try =
                            prob_.c.dot(x_try) / mu + barrier_value(trial) + ball_term(x_try);
                        if (std::isfinite(f_try) && f_try <= f_cur + 0.01 * alpha * slope) {
                            x = x_try;
                            factors = std::move(trial);
                            accepted = true;
                            break;
                        }
                    }
                    alpha *= 0.5;
                }
                ++newton_used_;
                if (!accepted) return PathStatus::Stalled;
                if (early_exit && early_exit(x)) return PathStatus::EarlyExit;
                if (std::abs(prob_.c.dot(x)) > 1e15 * (1.0 + initial_obj)) return PathStatus::Diverged;
            }
            const double obj = prob_.c.dot(x) + prob_.offset;
            if (nu_eff * mu <= gap_tol_rel * (1.0 + std::abs(obj))) {
                final_mu_ = mu;
                return PathStatus::Converged;
            }
            mu *= 0.2;
        }
        return PathStatus::Stalled;
    }

    double final_mu() const { return final_mu_; }

private:
    static double square(double v) { return v * v; }

    bool newton_direction(const std::vector<Eigen::LLT<MatrixXd>>& factors, const VectorXd& x,
                          double mu, VectorXd& grad_out, VectorXd& step_out) {
        const int m = prob_.m;
        VectorXd grad = prob_.c / mu;
        const bool dense = m <= kDenseNewtonLimit;
        MatrixXd hd;
        std::vector<Eigen::Triplet<double>> trips;
        if (dense) hd = MatrixXd::Zero(m, m);

        // Trust-region ball: grad 2x/s, hessian 2I/s + 4xx'/s^2 with
        // s = R^2 - |x|^2. The rank-one part joins the dense hessian
        // directly and the sparse solve through Sherman-Morrison.
        const double ball_slack = square(settings_.ball_radius) - x.squaredNorm();
        if (ball_slack <= 0.0) return false;
        grad += (2.0 / ball_slack) * x;
        const double ball_diag = 2.0 / ball_slack;
        const double ball_rank1 = 4.0 / square(ball_slack);
        if (dense) {
            hd.diagonal().array() += ball_diag;
            hd += ball_rank1 * x * x.transpose();
        } else {
            for (int i = 0; i < m; ++i) trips.emplace_back(i, i, ball_diag);
        }

        std::vector<MatrixXd> s_mats;
        for (std::size_t b = 0; b < prob_.blocks.size(); ++b) {
            const auto& blk = prob_.blocks[b];
            const auto lower = factors[b].matrixL();
            s_mats.clear();
            s_mats.reserve(blk.coeffs.size());
            for (const auto& [j, mj] : blk.coeffs) {
                // S_j = L^-1 M_j L^-T; grad phi_j = -tr(S_j), H_jk = <S_j, S_k>.
                MatrixXd t = lower.solve(mj);
                MatrixXd s = lower.solve(t.transpose());
                grad[j] -= s.trace();
                s_mats.push_back(std::move(s));
            }
            for (std::size_t a = 0; a < blk.coeffs.size(); ++a) {
                const int ja = blk.coeffs[a].first;
                for (std::size_t bb = a; bb < blk.coeffs.size(); ++bb) {
                    const int jb = blk.coeffs[bb].first;
                    const double h = (s_mats[a].cwiseProduct(s_mats[bb])).sum();
                    if (dense) {
                        hd(ja, jb) += h;
                        if (ja != jb) hd(jb, ja) += h;
                    } else {
                        trips.emplace_back(ja, jb, h);
                        if (ja != jb) trips.emplace_back(jb, ja, h);
                    }
                }
            }
        }

        grad_out = grad;
        double ridge = 0.0;
        for (int attempt = 0; attempt < 10; ++attempt) {
            if (dense) {
                MatrixXd h = hd;
                if (ridge > 0.0) h.diagonal().array() += ridge;
                Eigen::LDLT<MatrixXd> ldlt(h);
                if (ldlt.info() == Eigen::Success) {
                    step_out = ldlt.solve(-grad);
                    if (step_out.allFinite() && -grad.dot(step_out) >= -1e-12) return true;
                }
            } else {
                Eigen::SparseMatrix<double> h(m, m);
                h.setFromTriplets(trips.begin(), trips.end());
                if (ridge > 0.0)
                    for (int i = 0; i < m; ++i) h.coeffRef(i, i) += ridge;
                Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(h);
                if (ldlt.info() == Eigen::Success) {
                    // (H + r uu')^-1 g = H^-1 g - r (u'H^-1 g)/(1 + r u'H^-1 u) H^-1 u
                    const VectorXd hg = ldlt.solve(-grad);
                    const VectorXd hu = ldlt.solve(x);
                    const double denom = 1.0 + ball_rank1 * x.dot(hu);
                    step_out = hg - (ball_rank1 * x.dot(hg) / denom) * hu;
                    if (step_out.allFinite() && -grad.dot(step_out) >= -1e-12) return true;
                }
            }
            ridge = (ridge == 0.0) ? 1e-12 : ridge * 100.0;
        }
        return false;
    }

    const Compiled& prob_;
    const Settings& settings_;
    long newton_used_ = 0;
    double final_mu_ = 0.0;
};

// Phase 1: minimize t subject to F_b(x) + t I >= 0 and t >= -t_cap.
Compiled make_phase1(const Compiled& base, double t_cap) {
    Compiled p1;
    p1.m = base.m + 1;
    p1.offset = 0.0;
    p1.layout = base.layout;
    p1.c = VectorXd::Zero(p1.m);
    p1.c[base.m] = 1.0;
    p1.blocks = base.blocks;
    for (auto& blk : p1.blocks) {
        blk.coeffs.emplace_back(base.m, MatrixXd::Identity(blk.dim, blk.dim));
        p1.nu += blk.dim;
    }
    CompiledBlock bound;
    bound.dim = 1;
    bound.f0 = MatrixXd::Constant(1, 1, t_cap);
    bound.coeffs.emplace_back(base.m, MatrixXd::Identity(1, 1));
    bound.scale = 1.0;
    bound.f0_norm_orig = t_cap;
    p1.blocks.push_back(std::move(bound));
    p1.nu += 1.0;
    return p1;
}

}  // namespace

Solution Problem::solve(const Settings& settings) const {
    const Compiled prob = compile_problem(vars_, lmis_, objective_, objective_offset_);

    Solution sol;
    auto fill_values = [&](const VectorXd& x) {
        for (std::size_t v = 0; v < prob.layout.size(); ++v) {
            const VarLayout& l = prob.layout[v];
            MatrixXd val(l.rows, l.cols);
            for (int k = 0; k < l.count; ++k) {
                const auto [r, c] = scalar_entry(l, k);
                val(r, c) = x[l.offset + k];
                if (l.symmetric) val(c, r) = x[l.offset + k];
            }
            sol.values[static_cast<int>(v)] = std::move(val);
        }
        sol.objective = prob.c.dot(x) + prob.offset;
    };

    VectorXd x = VectorXd::Zero(prob.m);
    if (prob.blocks.empty()) {
        fill_values(x);
        sol.status = Status::Optimal;
        return sol;
    }

    // Phase 1. Slack start: one unit above the worst violation at x = 0.
    double worst = 0.0;
    for (const auto& blk : prob.blocks)
        worst = std::max(worst, -min_eigenvalue(eval_block(blk, x)));
    double t0 = worst + 1.0;
    const double t_cap = std::max(4.0, 4.0 * t0);

    const Compiled p1 = make_phase1(prob, t_cap);
    VectorXd x1 = VectorXd::Zero(p1.m);
    x1[prob.m] = t0;

    BarrierSolver phase1(p1, settings);
    constexpr double kFeasibleExit = -1e-4;
    const auto p1_status = phase1.follow(
        x1, 1.0 + std::abs(t0), 1e-10,
        [&](const VectorXd& xt) { return xt[prob.m] <= kFeasibleExit; });
    sol.diagnostics.newton_iterations = phase1.newton_used();
    sol.diagnostics.phase1_slack = x1[prob.m];

    using PS = BarrierSolver::PathStatus;
    if (p1_status == PS::IterationLimit) {
        fill_values(x1.head(prob.m));
        sol.status = Status::IterationLimit;
        return sol;
    }
    if (p1_status == PS::Stalled || p1_status == PS::Diverged) {
        fill_values(x1.head(prob.m));
        sol.status = Status::IllConditioned;
        return sol;
    }
    const double ball_sq = settings.ball_radius * settings.ball_radius;
    if (p1_status == PS::Converged) {
        // Path converged without reaching a comfortable interior margin.
        const double t_final = x1[prob.m];
        if (t_final >= 1e-9) {
            // A minimizer pressing the trust region cannot certify that no
            // feasible point exists further out.
            sol.status = x1.squaredNorm() >= 0.64 * ball_sq ? Status::IllConditioned
                                                            : Status::Infeasible;
            return sol;
        }
        if (t_final > -1e-11) {
            sol.status = Status::IllConditioned;
            return sol;
        }
    }
    x = x1.head(prob.m);

    // Phase 2.
    std::vector<Eigen::LLT<MatrixXd>> check;
    if (!factorize_all(prob, x, check)) {
        // The slack made the combined problem feasible but x alone is not
        // strictly feasible; treat as numerically marginal.
        fill_values(x);
        sol.status = Status::IllConditioned;
        return sol;
    }

    if (prob.c.cwiseAbs().maxCoeff() == 0.0) {
        fill_values(x);
        sol.status = Status::Optimal;
        sol.diagnostics.relative_gap = 0.0;
    } else {
        Settings remaining = settings;
        remaining.max_iter = settings.max_iter - phase1.newton_used();
        BarrierSolver phase2(prob, remaining);
        const double mu0 = 1.0 + std::abs(prob.c.dot(x));
        const auto p2_status = phase2.follow(x, mu0, settings.gap_tol, nullptr);
        sol.diagnostics.newton_iterations += phase2.newton_used();
        fill_values(x);
        switch (p2_status) {
            case PS::Converged:
                // An optimum pressing the trust region is not a certified
                // optimum of the unrestricted problem (e.g. an unbounded
                // descent direction).
                sol.status = x.squaredNorm() >= 0.64 * ball_sq ? Status::IllConditioned
                                                               : Status::Optimal;
                sol.diagnostics.relative_gap =
                    (prob.nu + 2.0) * phase2.final_mu() / (1.0 + std::abs(sol.objective));
                break;
            case PS::IterationLimit:
                sol.status = Status::IterationLimit;
                return sol;
            default:
                sol.status = Status::IllConditioned;
                return sol;
        }
    }

    // Post-hoc verification; Optimal is never reported on the solver's word alone.
    double worst_margin = std::numeric_limits<double>::infinity();
    for (const auto& blk : prob.blocks) {
        const double eig = min_eigenvalue(eval_block(blk, x)) * blk.scale;
        const double rel = eig / (1.0 + blk.f0_norm_orig);
        worst_margin = std::min(worst_margin, rel);
    }
    sol.diagnostics.worst_lmi_margin = worst_margin;
    if (worst_margin < -settings.feas_tol) sol.status = Status::IllConditioned;
    return sol;
}

void Problem::dump(std::ostream& os) const {
    const Compiled prob = compile_problem(vars_, lmis_, objective_, objective_offset_);
    os << "# sdp dump: <lmi> <row> <col> <const|v{scalar}> <value>\n";
    for (std::size_t b = 0; b < prob.blocks.size(); ++b) {
        const auto& blk = prob.blocks[b];
        for (int r = 0; r < blk.dim; ++r)
            for (int c = 0; c < blk.dim; ++c) {
                const double v = blk.f0(r, c) * blk.scale;
                if (v != 0.0) os << b << ' ' << r << ' ' << c << " const " << v << '\n';
            }
        for (const auto& [j, mj] : blk.coeffs)
            for (int r = 0; r < blk.dim; ++r)
                for (int c = 0; c < blk.dim; ++c) {
                    const double v = mj(r, c) * blk.scale;
                    if (v != 0.0) os << b << ' ' << r << ' ' << c << " v" << j << ' ' << v << '\n';
                }
    }
    for (int j = 0; j < prob.m; ++j)
        if (prob.c[j] != 0.0) os << "obj v" << j << ' ' << prob.c[j] << '\n';
    if (prob.offset != 0.0) os << "obj const " << prob.offset << '\n';
}

}  // namespace prc::sdp
