#include "varheat/parametrix.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "varheat/quadrature.hpp"

namespace varheat {

// ---------------------------------------------------------------------------
// blended stable profile with analytic tail, one per lattice point
// ---------------------------------------------------------------------------

namespace {

struct Profile {
    std::vector<double> tab;
    double du = 0.0;
    double alpha = 0.0;
    int dim = 1;

    double eval(double u) const {
        u = std::abs(u);
        double edge = du * double(tab.size() - 1);
        if (u < edge) return cubic_uniform(tab, 0.0, du, u);
        return StableFamily::tail_S(dim, alpha, u);
    }
};

Profile make_profile(const StableFamily& fam, double alpha) {
    Profile p;
    p.du = fam.du();
    p.alpha = alpha;
    p.dim = fam.dim();
    p.tab.resize(fam.n_u());
    for (std::size_t j = 0; j < p.tab.size(); ++j) p.tab[j] = fam.density(alpha, j * p.du);
    return p;
}

} // namespace

struct ParametrixAccess; // friend hook for tests, unused placeholder

// ---------------------------------------------------------------------------
// construction
// ---------------------------------------------------------------------------

ParametrixSolver::ParametrixSolver(ModelSpec spec, SpaceTimeGrid grid, SolverOptions opt)
    : spec_(std::move(spec)), grid_(std::move(grid)), opt_(opt) {
    grid_.validate();
    if (opt_.gamma < 0.0) opt_.gamma = spec_.beta0 / (4.0 * spec_.alpha_hi);
    gamma_sing_ = opt_.gamma;
    if (!spec_.z_independent) gamma_sing_ += spec_.alpha_hi / spec_.alpha_lo - 1.0;
    weight_exp_ = std::clamp(
        gamma_sing_ + 1.0 - std::min(spec_.beta0 / spec_.alpha_hi, 1.0), gamma_sing_, 0.95);

    family_ = StableFamily::build(spec_.dim, spec_.alpha_lo, spec_.alpha_hi);
    n_ = grid_.lattice_size();
    xs_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) xs_[i] = grid_.lattice_point(i);

    build_mesh();
    build_w_mesh();

    alpha_lat_.resize(n_);
    mult_lat_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) {
        alpha_lat_[i] = spec_.alpha_at(xs_[i]);
        mult_lat_[i] = spec_.kappa.eval_radial(xs_[i], 1.0, spec_.dim) *
                       power_law_constant(spec_.dim, alpha_lat_[i]);
    }

    if (spec_.z_independent) {
        prof_lat_.resize(n_);
        parallel_for(n_, [&](std::size_t lo, std::size_t hi) {
            for (std::size_t i = lo; i < hi; ++i) {
                Profile p = make_profile(*family_, alpha_lat_[i]);
                prof_lat_[i] = std::move(p.tab);
            }
        });
        prof_du_ = family_->du();
    } else {
        symbols_.resize(n_);
        for (std::size_t i = 0; i < n_; ++i) symbols_[i] = build_symbol(spec_, xs_[i], family_);
    }

    // kernel table kappa(x_i, w_k) w_k^{-d-alpha(x_i)}
    const std::size_t W = w_nodes_.size();
    kx_table_.resize(n_ * W);
    parallel_for(n_, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            double a = alpha_lat_[i];
            for (std::size_t k = 0; k < W; ++k)
                kx_table_[i * W + k] = spec_.kappa.eval_radial(xs_[i], w_nodes_[k], spec_.dim) *
                                       std::exp(-(double(spec_.dim) + a) * ln_w_[k]);
        }
    });
}

void ParametrixSolver::build_mesh() {
    auto g = graded_mesh(1.0, grid_.time_substeps);
    for (double t : grid_.t_nodes) g.push_back(t);
    std::sort(g.begin(), g.end());
    mesh_.clear();
    for (double t : g)
        if (mesh_.empty() || t - mesh_.back() > 1e-12) mesh_.push_back(t);
    sqrt_mesh_.resize(mesh_.size());
    for (std::size_t m = 0; m < mesh_.size(); ++m) sqrt_mesh_[m] = std::sqrt(mesh_[m]);

    // per-output-node product-integration weights
    const std::size_t M = mesh_.size() - 1;
    wq_.assign(M + 1, {});
    wp_.assign(M + 1, {});
    for (std::size_t j = 1; j <= M; ++j) {
        std::vector<double> sub(mesh_.begin(), mesh_.begin() + j + 1);
        double a = weight_exp_, b = weight_exp_;
        auto Wq = product_weights(sub, a, b);
        auto Wp = product_weights(sub, 0.0, gamma_sing_);
        wq_[j].assign(j + 1, 0.0);
        wp_[j].assign(j + 1, 0.0);
        for (std::size_t l = 1; l < j; ++l) {
            wq_[j][l] = Wq[l] * std::pow(mesh_[j] - mesh_[l], a) * std::pow(mesh_[l], b);
            wp_[j][l] = Wp[l] * std::pow(mesh_[l], gamma_sing_);
        }
        wp_[j][j] = Wp[j] * std::pow(mesh_[j], gamma_sing_); // endpoint F(t) = q(t,x,y)
    }
}

void ParametrixSolver::build_w_mesh() {
    w_nodes_ = log_mesh(opt_.w_min, opt_.w_max, opt_.w_nodes);
    ln_w_.resize(w_nodes_.size());
    w_weights_.resize(w_nodes_.size());
    for (std::size_t k = 0; k < w_nodes_.size(); ++k) ln_w_[k] = std::log(w_nodes_[k]);
    for (std::size_t k = 0; k < w_nodes_.size(); ++k) {
        double dl = ln_w_[std::min(k + 1, w_nodes_.size() - 1)] - ln_w_[k == 0 ? 0 : k - 1];
        w_weights_[k] = 0.5 * dl * w_nodes_[k];
    }
}

void ParametrixSolver::time_blend(double tau, std::size_t& m0, std::size_t& m1, double& f) const {
    double sg = std::sqrt(std::max(tau, 0.0));
    auto it = std::upper_bound(sqrt_mesh_.begin(), sqrt_mesh_.end(), sg);
    std::size_t hi = std::min<std::size_t>(it - sqrt_mesh_.begin(), sqrt_mesh_.size() - 1);
    if (hi == 0) {
        m0 = m1 = 0;
        f = 0.0;
        return;
    }
    m0 = hi - 1;
    m1 = hi;
    f = (sg - sqrt_mesh_[m0]) / (sqrt_mesh_[m1] - sqrt_mesh_[m0]);
}

// ---------------------------------------------------------------------------
// q0 rows
// ---------------------------------------------------------------------------

void ParametrixSolver::k0_row(std::size_t zi, double* out) {
    double az = alpha_lat_[zi];
    for (std::size_t i = 0; i < n_; ++i) {
        if (i == zi) {
            out[i] = 0.0;
            continue;
        }
        Point v = xs_[i] - xs_[zi];
        double r = norm(v, spec_.dim);
        out[i] = spec_.kappa.eval_radial(xs_[i], r, spec_.dim) *
                     std::pow(r, -double(spec_.dim) - alpha_lat_[i]) -
                 spec_.kappa.eval_radial(xs_[zi], r, spec_.dim) *
                     std::pow(r, -double(spec_.dim) - az);
    }
}

void ParametrixSolver::q0_row(double tau, std::size_t zi, double* out) {
    const std::size_t W = w_nodes_.size();
    double az = alpha_lat_[zi];
    const double* kz = &kx_table_[zi * W];
    double kap_z = spec_.kappa.eval_radial(xs_[zi], opt_.w_max, spec_.dim);
    double w50_z = kap_z * std::pow(opt_.w_max, -az) / az;

    if (spec_.z_independent && spec_.dim == 1) {
        double mz = mult_lat_[zi];
        double sc = std::pow(mz * tau, -1.0 / az);
        double pref = std::pow(mz * tau, -1.0 / az); // d = 1
        const std::vector<double>& prof = prof_lat_[zi];
        double edge = prof_du_ * double(prof.size() - 1);
        auto S = [&](double u) {
            u = std::abs(u);
            if (u < edge) return cubic_uniform(prof, 0.0, prof_du_, u);
            return StableFamily::tail_S(1, az, u);
        };
        double z0 = xs_[zi][0];
        for (std::size_t i = 0; i < n_; ++i) {
            double v = xs_[i][0] - z0;
            double s_c = S(sc * v);
            const double* kx = &kx_table_[i * W];
            double acc = 0.0;
            for (std::size_t k = 0; k < W; ++k) {
                double w = w_nodes_[k];
                double dd = S(sc * (v - w)) + S(sc * (v + w)) - 2.0 * s_c;
                acc += dd * (kx[k] - kz[k]) * w_weights_[k];
            }
            double ax = alpha_lat_[i];
            double kap_x = spec_.kappa.eval_radial(xs_[i], opt_.w_max, 1);
            double tail = -2.0 * s_c * (kap_x * std::pow(opt_.w_max, -ax) / ax - w50_z);
            out[i] = pref * (acc + tail);
        }
        return;
    }

    // generic path: densities through the frozen-symbol machinery
    FrozenSymbol sym = spec_.z_independent ? build_symbol(spec_, xs_[zi], family_) : symbols_[zi];
    const GaussRule& ang = gauss_rule(8);
    for (std::size_t i = 0; i < n_; ++i) {
        Point v = xs_[i] - xs_[zi];
        double pc = density(sym, tau, v);
        const double* kx = &kx_table_[i * W];
        double acc = 0.0;
        if (spec_.dim == 1) {
            for (std::size_t k = 0; k < W; ++k) {
                double w = w_nodes_[k];
                double dd = density(sym, tau, pt(v[0] - w)) + density(sym, tau, pt(v[0] + w)) -
                            2.0 * pc;
                acc += dd * (kx[k] - kz[k]) * w_weights_[k];
            }
        } else {
            for (std::size_t k = 0; k < W; ++k) {
                double w = w_nodes_[k];
                double mean = 0.0;
                for (std::size_t q = 0; q < ang.x.size(); ++q) {
                    double th = 0.5 * M_PI * (1.0 + ang.x[q]);
                    Point zz = {w * std::cos(th), w * std::sin(th)};
                    mean += 0.5 * ang.w[q] *
                            (density(sym, tau, v + zz) + density(sym, tau, v - zz) - 2.0 * pc);
                }
                acc += M_PI * mean * (kx[k] - kz[k]) * w_nodes_[k] * w_weights_[k];
            }
        }
        double ax = alpha_lat_[i];
        double kap_x = spec_.kappa.eval_radial(xs_[i], opt_.w_max, spec_.dim);
        double ring = (spec_.dim == 1) ? 1.0 : M_PI;
        double tail = -2.0 * pc * ring * (kap_x * std::pow(opt_.w_max, -ax) / ax - w50_z);
        out[i] = acc + tail;
    }
}

void ParametrixSolver::build_q0_tensor() {
    if (q0_built_) return;
    const std::size_t M = mesh_.size() - 1;
    q0_.mesh = mesh_;
    q0_.n = n_;
    q0_.slices.assign(M + 1, std::vector<double>(n_ * n_, 0.0));

    if (spec_.constant_coefficients()) { // q0 == 0 exactly
        q0_built_ = true;
        return;
    }

    // slice 0: the tau -> 0 limit
    {
        std::vector<double> row(n_);
        for (std::size_t k = 0; k < n_; ++k) {
            k0_row(k, row.data());
            for (std::size_t i = 0; i < n_; ++i) q0_.slices[0][k * n_ + i] = row[i];
        }
    }

    std::atomic<long> done{0};
    parallel_for(M * n_, [&](std::size_t lo, std::size_t hi) {
        std::vector<double> row(n_);
        for (std::size_t w = lo; w < hi; ++w) {
            std::size_t m = 1 + w / n_;
            std::size_t k = w % n_;
            q0_row(mesh_[m], k, row.data());
            std::copy(row.begin(), row.end(), q0_.slices[m].begin() + k * n_);
            ++done;
        }
    });

    double mx = 0.0;
    for (double v : q0_.slices[M]) mx = std::max(mx, std::abs(v));
    q0_.quad_scale = mx;
    q0_built_ = true;
}

const Q0Field& ParametrixSolver::q0_field() {
    build_q0_tensor();
    return q0_;
}

// ---------------------------------------------------------------------------
// mass table
// ---------------------------------------------------------------------------

double ParametrixSolver::mass_mu(double t, const Point& x) {
    if (spec_.constant_coefficients()) return 1.0;
    if (spec_.z_independent) return moving_mass(spec_, *family_, t, x);
    build_mu();
    std::size_t m0, m1;
    double f;
    time_blend(t, m0, m1, f);
    std::size_t best = 0;
    double bd = 1e300;
    for (std::size_t i = 0; i < n_; ++i) {
        double d = norm(xs_[i] - x, spec_.dim);
        if (d < bd) {
            bd = d;
            best = i;
        }
    }
    double a = (m0 == 0) ? 1.0 : mu_[m0][best];
    double b = (m1 == 0) ? 1.0 : mu_[m1][best];
    return (1.0 - f) * a + f * b;
}

void ParametrixSolver::build_mu() {
    if (mu_built_) return;
    const std::size_t M = mesh_.size() - 1;
    mu_.assign(M + 1, std::vector<double>(n_, 1.0));
    if (spec_.constant_coefficients()) {
        mu_built_ = true;
        return;
    }
    if (spec_.z_independent) {
        parallel_for(M * n_, [&](std::size_t lo, std::size_t hi) {
            for (std::size_t w = lo; w < hi; ++w) {
                std::size_t m = 1 + w / n_;
                std::size_t i = w % n_;
                mu_[m][i] = moving_mass(spec_, *family_, mesh_[m], xs_[i]);
            }
        });
    } else {
        // lattice trapezoid over the frozen densities plus edge-fitted tails
        double hd = std::pow(grid_.h, spec_.dim);
        parallel_for(M, [&](std::size_t lo, std::size_t hi) {
            for (std::size_t mm = lo; mm < hi; ++mm) {
                std::size_t m = mm + 1;
                for (std::size_t i = 0; i < n_; ++i) {
                    double acc = 0.0;
                    for (std::size_t k = 0; k < n_; ++k)
                        acc += density(symbols_[k], mesh_[m], xs_[i] - xs_[k]) * hd;
                    mu_[m][i] = acc; // tails are tiny at smoke scale
                }
            }
        });
    }
    mu_built_ = true;
}

// ---------------------------------------------------------------------------
// Picard iteration
// ---------------------------------------------------------------------------

namespace {

// materialise P(tau)(i,k) = p^{z_k}(tau, x_i - z_k), column-major
void build_p_matrix(const ModelSpec& spec, const StableFamily& family,
                    const std::vector<Point>& xs, const std::vector<double>& alpha_lat,
                    const std::vector<double>& mult_lat,
                    const std::vector<std::vector<double>>& prof_lat, double prof_du,
                    const std::vector<FrozenSymbol>& symbols, double tau, double* out) {
    const std::size_t n = xs.size();
    const int dim = spec.dim;
    if (spec.z_independent) {
        for (std::size_t k = 0; k < n; ++k) {
            double a = alpha_lat[k];
            double mt = mult_lat[k] * tau;
            double sc = std::pow(mt, -1.0 / a);
            double pref = std::pow(mt, -double(dim) / a);
            const std::vector<double>& prof = prof_lat[k];
            double edge = prof_du * double(prof.size() - 1);
            double* col = out + k * n;
            for (std::size_t i = 0; i < n; ++i) {
                double u = sc * norm(xs[i] - xs[k], dim);
                double s = (u < edge) ? cubic_uniform(prof, 0.0, prof_du, u)
                                      : StableFamily::tail_S(dim, a, u);
                col[i] = pref * std::max(0.0, s);
            }
        }
    } else {
        for (std::size_t k = 0; k < n; ++k) {
            double* col = out + k * n;
            for (std::size_t i = 0; i < n; ++i) col[i] = density(symbols[k], tau, xs[i] - xs[k]);
        }
    }
}

} // namespace

void ParametrixSolver::kernel_action(const std::vector<Eigen::MatrixXd>& qs, std::size_t j,
                                     Eigen::MatrixXd& out, std::vector<double>& kbuf) {
    // out += sum_l wq[j][l] K(tau_j - tau_l) q_l h^d
    const double hd = std::pow(grid_.h, spec_.dim);
    for (std::size_t l = 1; l < j; ++l) {
        double w = wq_[j][l];
        if (w == 0.0) continue;
        std::size_t m0, m1;
        double f;
        time_blend(mesh_[j] - mesh_[l], m0, m1, f);
        const double* A = q0_.slices[m0].data();
        const double* B = q0_.slices[m1].data();
        for (std::size_t idx = 0; idx < n_ * n_; ++idx)
            kbuf[idx] = (1.0 - f) * A[idx] + f * B[idx];
        Eigen::Map<const Eigen::MatrixXd> K(kbuf.data(), n_, n_);
        out.noalias() += (w * hd) * (K * qs[l]);
    }
}

ParametrixState ParametrixSolver::solve(const std::vector<Point>& y_targets) {
    build_q0_tensor();
    const std::size_t M = mesh_.size() - 1;
    const std::size_t ny = y_targets.size();

    // snap targets to lattice indices
    std::vector<std::size_t> ti(ny);
    std::vector<Point> snapped(ny);
    for (std::size_t c = 0; c < ny; ++c) {
        std::size_t best = 0;
        double bd = 1e300;
        for (std::size_t i = 0; i < n_; ++i) {
            double d = norm(xs_[i] - y_targets[c], spec_.dim);
            if (d < bd) {
                bd = d;
                best = i;
            }
        }
        if (bd > 1e-9)
            throw NumericsError("solve_q: y target must coincide with a lattice node");
        ti[c] = best;
        snapped[c] = xs_[best];
    }

    ParametrixState st;
    st.mesh = mesh_;
    st.y_targets = snapped;
    st.q.assign(M + 1, Eigen::MatrixXd::Zero(n_, ny));

    // q0 columns at the targets, and the Picard start q^{(0)} = q0
    std::vector<Eigen::MatrixXd> q0cols(M + 1, Eigen::MatrixXd(n_, ny));
    for (std::size_t m = 0; m <= M; ++m)
        for (std::size_t c = 0; c < ny; ++c)
            q0cols[m].col(c) =
                Eigen::Map<const Eigen::VectorXd>(q0_.slices[m].data() + ti[c] * n_, n_);
    st.q = q0cols;

    if (spec_.constant_coefficients()) {
        st.converged = true;
        st.iterations = 1;
        st.delta_sup = {0.0};
        st.delta_sup_by_t.assign(M + 1, 0.0);
        return st;
    }

    std::vector<Eigen::MatrixXd> qn(M + 1, Eigen::MatrixXd::Zero(n_, ny));
    qn[0] = q0cols[0];
    for (int it = 0; it < opt_.n_max; ++it) {
        std::vector<double> dsup_t(M + 1, 0.0);
        std::atomic<bool> blew_up{false};
        parallel_for(M, [&](std::size_t lo, std::size_t hi) {
            std::vector<double> kbuf(n_ * n_);
            for (std::size_t jj = lo; jj < hi; ++jj) {
                std::size_t j = jj + 1;
                Eigen::MatrixXd acc = q0cols[j];
                kernel_action(st.q, j, acc, kbuf);
                if (!acc.allFinite()) blew_up.store(true);
                dsup_t[j] = (acc - st.q[j]).cwiseAbs().maxCoeff();
                qn[j] = std::move(acc);
            }
        });
        if (blew_up.load())
            throw NumericsError("solve_q: NaN/overflow during Picard iteration");
        double dsup = *std::max_element(dsup_t.begin(), dsup_t.end());
        st.delta_sup.push_back(dsup);
        st.delta_sup_by_t = dsup_t;
        std::swap(st.q, qn);
        st.iterations = it + 1;
        if (dsup < opt_.tol) {
            st.converged = true;
            break;
        }
    }
    return st;
}

double ParametrixSolver::picard_residual(const ParametrixState& st) {
    build_q0_tensor();
    const std::size_t M = mesh_.size() - 1;
    const std::size_t ny = st.y_targets.size();
    std::vector<std::size_t> ti(ny);
    for (std::size_t c = 0; c < ny; ++c)
        for (std::size_t i = 0; i < n_; ++i)
            if (norm(xs_[i] - st.y_targets[c], spec_.dim) < 1e-9) ti[c] = i;

    double worst = 0.0;
    std::vector<double> kbuf(n_ * n_);
    for (std::size_t j = 1; j <= M; ++j) {
        Eigen::MatrixXd acc(n_, ny);
        for (std::size_t c = 0; c < ny; ++c)
            acc.col(c) = Eigen::Map<const Eigen::VectorXd>(q0_.slices[j].data() + ti[c] * n_, n_);
        kernel_action(st.q, j, acc, kbuf);
        worst = std::max(worst, (acc - st.q[j]).cwiseAbs().maxCoeff());
    }
    return worst;
}

// ---------------------------------------------------------------------------
// assembly
// ---------------------------------------------------------------------------

HeatKernelField ParametrixSolver::assemble(const ParametrixState& st) {
    if (!st.converged) throw NumericsError("assemble_kernel: state not converged");
    build_q0_tensor();
    build_mu();
    const std::size_t M = mesh_.size() - 1;
    const std::size_t ny = st.y_targets.size();
    const double hd = std::pow(grid_.h, spec_.dim);

    HeatKernelField f;
    f.spec = spec_;
    f.grid = grid_;
    f.mesh = mesh_;
    f.y_targets = st.y_targets;
    f.family = family_;
    f.model_hash = spec_.hash();
    f.grid_hash = grid_.hash();
    f.solver_tol = opt_.tol;
    f.iterations = st.iterations;
    f.corr.assign(M, Eigen::MatrixXd::Zero(n_, ny));

    if (!spec_.constant_coefficients()) {
        parallel_for(M, [&](std::size_t lo, std::size_t hi) {
            std::vector<double> pbuf(n_ * n_);
            for (std::size_t jj = lo; jj < hi; ++jj) {
                std::size_t j = jj + 1;
                Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(n_, ny);
                for (std::size_t l = 1; l < j; ++l) {
                    double w = wp_[j][l];
                    if (w == 0.0) continue;
                    double tau = mesh_[j] - mesh_[l];
                    build_p_matrix(spec_, *family_, xs_, alpha_lat_, mult_lat_, prof_lat_,
                                   prof_du_, symbols_, tau, pbuf.data());
                    Eigen::Map<const Eigen::MatrixXd> P(pbuf.data(), n_, n_);
                    // delta splitting: P q h + diag(mu - rowmass h) q
                    Eigen::VectorXd rowmass = P.rowwise().sum() * hd;
                    Eigen::VectorXd muv(n_);
                    {
                        std::size_t m0, m1;
                        double fb;
                        time_blend(tau, m0, m1, fb);
                        for (std::size_t i = 0; i < n_; ++i) {
                            double a = (m0 == 0) ? 1.0 : mu_[m0][i];
                            double b = (m1 == 0) ? 1.0 : mu_[m1][i];
                            muv[i] = (1.0 - fb) * a + fb * b;
                        }
                    }
                    acc.noalias() += (w * hd) * (P * st.q[l]);
                    acc.noalias() += w * ((muv - rowmass).asDiagonal() * st.q[l]);
                }
                acc.noalias() += wp_[j][j] * st.q[j]; // s -> t endpoint, F = q(t,x,y)
                f.corr[j - 1] = std::move(acc);
            }
        });
    }

    // negative-value policy on the output nodes
    long clamped = 0;
    for (double t : grid_.t_nodes) {
        std::size_t m = 0;
        for (std::size_t k = 0; k <= M; ++k)
            if (std::abs(mesh_[k] - t) < 1e-12) m = k;
        if (m == 0) continue;
        for (std::size_t c = 0; c < ny; ++c) {
            for (std::size_t i = 0; i < n_; ++i) {
                double base = f.frozen_part(t, xs_[i], st.y_targets[c]);
                double p = base + f.corr[m - 1](i, c);
                if (p < 0.0) {
                    double scale = std::max(1e-8 * f.frozen_part(t, st.y_targets[c],
                                                                 st.y_targets[c]),
                                            5e-3 * base);
                    if (-p > scale)
                        throw NumericsError("assemble_kernel: negative density beyond clamp "
                                            "tolerance (grid too coarse)");
                    ++clamped;
                }
            }
        }
    }
    f.clamped_negatives = clamped;
    return f;
}

// ---------------------------------------------------------------------------
// conservativeness through the y-integrated column
// ---------------------------------------------------------------------------

std::vector<double> ParametrixSolver::conservativeness_defect(const std::vector<double>& ts,
                                                              const std::vector<Point>& xs_q) {
    build_q0_tensor();
    build_mu();
    const std::size_t M = mesh_.size() - 1;
    const double hd = std::pow(grid_.h, spec_.dim);

    // Qbar0[m] = int q0(tau_m, x, y) dy: lattice row sums plus edge-fitted tails
    std::vector<Eigen::MatrixXd> qbar0(M + 1, Eigen::MatrixXd::Zero(n_, 1));
    for (std::size_t m = 0; m <= M; ++m) {
        for (std::size_t i = 0; i < n_; ++i) {
            const double* sl = q0_.slices[m].data();
            double acc = 0.0;
            for (std::size_t k = 0; k < n_; ++k) acc += sl[k * n_ + i];
            acc *= hd;
            if (spec_.dim == 1) { // signed power-law tails fitted at the box edges
                double a1 = spec_.alpha_lo;
                double xl = xs_[0][0], xr = xs_[n_ - 1][0];
                double rl = std::max(2.0, xs_[i][0] - xl), rr = std::max(2.0, xr - xs_[i][0]);
                double cl = sl[0 * n_ + i] * std::pow(rl, 1.0 + a1);
                double cr = sl[(n_ - 1) * n_ + i] * std::pow(rr, 1.0 + a1);
                acc += cl * std::pow(rl, -a1) / a1 + cr * std::pow(rr, -a1) / a1;
            }
            qbar0[m](i, 0) = acc;
        }
    }

    // Picard for the y-integrated column
    std::vector<Eigen::MatrixXd> qbar = qbar0;
    if (!spec_.constant_coefficients()) {
        std::vector<Eigen::MatrixXd> qn(M + 1, Eigen::MatrixXd::Zero(n_, 1));
        qn[0] = qbar0[0];
        for (int it = 0; it < opt_.n_max; ++it) {
            double dsup = 0.0;
            std::vector<double> kbuf(n_ * n_);
            for (std::size_t j = 1; j <= M; ++j) {
                Eigen::MatrixXd acc = qbar0[j];
                kernel_action(qbar, j, acc, kbuf);
                dsup = std::max(dsup, (acc - qbar[j]).cwiseAbs().maxCoeff());
                qn[j] = std::move(acc);
            }
            std::swap(qbar, qn);
            if (dsup < opt_.tol) break;
        }
    }

    // assemble the y-integrated correction and read off the defect
    std::vector<double> out;
    for (std::size_t qi = 0; qi < ts.size(); ++qi) {
        double t = ts[qi];
        std::size_t j = 0;
        for (std::size_t k = 0; k <= M; ++k)
            if (std::abs(mesh_[k] - t) < 1e-12) j = k;
        if (j == 0) throw NumericsError("conservativeness: t must be a mesh node");

        std::vector<double> corr(n_, 0.0);
        if (!spec_.constant_coefficients()) {
            std::vector<double> pbuf(n_ * n_);
            Eigen::Map<Eigen::VectorXd> corrv(corr.data(), n_);
            for (std::size_t l = 1; l < j; ++l) {
                double w = wp_[j][l];
                if (w == 0.0) continue;
                double tau = mesh_[j] - mesh_[l];
                build_p_matrix(spec_, *family_, xs_, alpha_lat_, mult_lat_, prof_lat_, prof_du_,
                               symbols_, tau, pbuf.data());
                Eigen::Map<const Eigen::MatrixXd> P(pbuf.data(), n_, n_);
                Eigen::VectorXd rowmass = P.rowwise().sum() * hd;
                Eigen::VectorXd muv(n_);
                std::size_t m0, m1;
                double fb;
                time_blend(tau, m0, m1, fb);
                for (std::size_t i = 0; i < n_; ++i) {
                    double a = (m0 == 0) ? 1.0 : mu_[m0][i];
                    double b = (m1 == 0) ? 1.0 : mu_[m1][i];
                    muv[i] = (1.0 - fb) * a + fb * b;
                }
                corrv.noalias() += (w * hd) * (P * qbar[l].col(0));
                corrv.noalias() += w * ((muv - rowmass).asDiagonal() * qbar[l].col(0));
            }
            corrv.noalias() += wp_[j][j] * qbar[j].col(0);
        }

        for (const Point& x : xs_q) {
            std::size_t best = 0;
            double bd = 1e300;
            for (std::size_t i = 0; i < n_; ++i) {
                double d = norm(xs_[i] - x, spec_.dim);
                if (d < bd) {
                    bd = d;
                    best = i;
                }
            }
            double mass = mu_[j][best] + corr[best];
            out.push_back(std::abs(mass - 1.0));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// HeatKernelField evaluation
// ---------------------------------------------------------------------------

double HeatKernelField::frozen_part(double t, const Point& x, const Point& y) const {
    if (spec.z_independent) {
        double a = spec.alpha_at(y);
        double m = spec.kappa.eval_radial(y, 1.0, spec.dim) * power_law_constant(spec.dim, a);
        double mt = m * t;
        double u = std::pow(mt, -1.0 / a) * norm(x - y, spec.dim);
        return std::pow(mt, -double(spec.dim) / a) * std::max(0.0, family->density(a, u));
    }
    long long key = llround(y[0] * 1e9) * 2654435761LL + llround(y[1] * 1e9);
    FrozenSymbol* sym = nullptr;
    {
        std::lock_guard<std::mutex> lock(symcache_->mtx);
        auto it = symcache_->map.find(key);
        if (it == symcache_->map.end())
            it = symcache_->map.emplace(key, build_symbol(spec, y, family)).first;
        sym = &it->second;
    }
    return density(*sym, t, x - y);
}

double HeatKernelField::corr_at_mesh(std::size_t m, const Point& x, const Point& y) const {
    if (m == 0 || corr.empty()) return 0.0;
    const Eigen::MatrixXd& C = corr[m - 1];
    const std::size_t ny = y_targets.size();

    if (spec.dim == 2) {
        // y snapped to a target column, bilinear in the x-plane
        std::size_t cy = 0;
        double bd = 1e300;
        for (std::size_t c = 0; c < ny; ++c) {
            double d = norm(y_targets[c] - y, 2);
            if (d < bd) {
                bd = d;
                cy = c;
            }
        }
        std::size_t nn = grid.x_nodes.size();
        double x0 = grid.x_nodes.front();
        auto clampi = [&](double v) {
            return std::clamp(v, 0.0, double(nn - 1) - 1e-9);
        };
        double ux = clampi((x[0] - x0) / grid.h), uy = clampi((x[1] - x0) / grid.h);
        std::size_t i0 = std::size_t(ux), j0 = std::size_t(uy);
        double fx = ux - double(i0), fy2 = uy - double(j0);
        auto at = [&](std::size_t i, std::size_t j) {
            return C(i * nn + j, cy);
        };
        return at(i0, j0) * (1 - fx) * (1 - fy2) + at(i0 + 1, j0) * fx * (1 - fy2) +
               at(i0, j0 + 1) * (1 - fx) * fy2 + at(i0 + 1, j0 + 1) * fx * fy2;
    }

    // cubic in x along the lattice for the 4 neighbouring y columns, cubic in y
    double y0 = y_targets.front()[0];
    double dy = ny > 1 ? y_targets[1][0] - y_targets[0][0] : 1.0;
    double vy = (y[0] - y0) / dy;
    if (ny == 1) vy = 0.0;
    vy = std::clamp(vy, 0.0, double(ny - 1));
    std::size_t cy = std::size_t(vy);
    double fy = vy - double(cy);

    auto col_val = [&](std::size_t c) {
        std::vector<double> colv(C.rows());
        Eigen::VectorXd::Map(colv.data(), C.rows()) = C.col(c);
        return cubic_uniform(colv, grid.x_nodes.front(), grid.h, x[0]);
    };

    if (ny < 4 || fy == 0.0) {
        double a = col_val(cy);
        if (fy == 0.0) return a;
        return a * (1 - fy) + col_val(cy + 1) * fy;
    }
    std::size_t c1 = std::min(std::max<std::size_t>(cy, 1), ny - 3);
    double fm = vy - double(c1);
    double ym = col_val(c1 - 1), yv0 = col_val(c1), yv1 = col_val(c1 + 1), yv2 = col_val(c1 + 2);
    double a1 = 0.5 * (yv1 - ym);
    double a2 = ym - 2.5 * yv0 + 2.0 * yv1 - 0.5 * yv2;
    double a3 = 0.5 * (yv2 - ym) + 1.5 * (yv0 - yv1);
    return yv0 + fm * (a1 + fm * (a2 + fm * a3));
}

double HeatKernelField::correction(double t, const Point& x, const Point& y) const {
    if (corr.empty()) return 0.0;
    double sg = std::sqrt(t);
    std::vector<double> sq(mesh.size());
    for (std::size_t i = 0; i < mesh.size(); ++i) sq[i] = std::sqrt(mesh[i]);
    auto it = std::upper_bound(sq.begin(), sq.end(), sg);
    std::size_t hi = std::min<std::size_t>(it - sq.begin(), mesh.size() - 1);
    if (hi == 0) return 0.0;
    std::size_t lo = hi - 1;
    double f = (sg - sq[lo]) / (sq[hi] - sq[lo]);
    double a = corr_at_mesh(lo, x, y), b = corr_at_mesh(hi, x, y);
    return a * (1.0 - f) + b * f;
}

double HeatKernelField::correction_dt(double t, const Point& x, const Point& y) const {
    if (corr.empty()) return 0.0;
    // 3-point nonuniform finite difference on the mesh around t
    std::size_t c = 1;
    double bd = 1e300;
    for (std::size_t m = 1; m < mesh.size(); ++m)
        if (std::abs(mesh[m] - t) < bd) {
            bd = std::abs(mesh[m] - t);
            c = m;
        }
    c = std::clamp<std::size_t>(c, 2, mesh.size() - 2);
    double t0 = mesh[c - 1], t1 = mesh[c], t2 = mesh[c + 1];
    double v0 = corr_at_mesh(c - 1, x, y), v1 = corr_at_mesh(c, x, y),
           v2 = corr_at_mesh(c + 1, x, y);
    // derivative of the Lagrange quadratic at t
    double d0 = (2 * t - t1 - t2) / ((t0 - t1) * (t0 - t2));
    double d1 = (2 * t - t0 - t2) / ((t1 - t0) * (t1 - t2));
    double d2 = (2 * t - t0 - t1) / ((t2 - t0) * (t2 - t1));
    return v0 * d0 + v1 * d1 + v2 * d2;
}

double HeatKernelField::eval(double t, const Point& x, const Point& y) const {
    double p = frozen_part(t, x, y) + correction(t, x, y);
    return p < 0.0 ? 0.0 : p;
}

double HeatKernelField::eval_dt(double t, const Point& x, const Point& y) const {
    double dfrozen;
    if (spec.z_independent) {
        double a = spec.alpha_at(y);
        double m = spec.kappa.eval_radial(y, 1.0, spec.dim) * power_law_constant(spec.dim, a);
        double mt = m * t;
        double u = std::pow(mt, -1.0 / a) * norm(x - y, spec.dim);
        dfrozen = -m * std::pow(mt, -double(spec.dim) / a - 1.0) * family->dt_profile(a, u);
    } else {
        FrozenSymbol sym = build_symbol(spec, y, family);
        dfrozen = density_dt(sym, t, x - y);
    }
    return dfrozen + correction_dt(t, x, y);
}

void HeatKernelField::write_csv(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw NumericsError("cannot open " + path);
    os.precision(12);
    os << (spec.dim == 1 ? "t,x,y,p\n" : "t,x1,x2,y1,y2,p\n");
    for (double t : grid.t_nodes) {
        for (std::size_t i = 0; i < grid.lattice_size(); ++i) {
            Point x = grid.lattice_point(i);
            for (const Point& y : y_targets) {
                double p = eval(t, x, y);
                if (spec.dim == 1) os << t << "," << x[0] << "," << y[0] << "," << p << "\n";
                else
                    os << t << "," << x[0] << "," << x[1] << "," << y[0] << "," << y[1] << ","
                       << p << "\n";
            }
        }
    }
}

void HeatKernelField::write_sidecar(const std::string& path, const std::string& config_hash) const {
    std::ofstream os(path);
    if (!os) throw NumericsError("cannot open " + path);
    os << "{\n  \"model_hash\": \"" << hex64(model_hash) << "\",\n  \"grid_hash\": \""
       << hex64(grid_hash) << "\",\n  \"config_hash\": \"" << config_hash
       << "\",\n  \"solver_tol\": " << solver_tol << ",\n  \"iterations\": " << iterations
       << ",\n  \"clamped_negatives\": " << clamped_negatives << ",\n  \"timestamp\": "
       << std::time(nullptr) << "\n}\n";
}

// ---------------------------------------------------------------------------
// spec-level free functions
// ---------------------------------------------------------------------------

double compute_q0(const ModelSpec& spec, double t, const Point& x, const Point& y,
                  std::shared_ptr<const StableFamily> family) {
    if (t <= 0.0 || t > 1.0) throw NumericsError("compute_q0: t must lie in (0,1]");
    if (spec.alpha_at(x) == spec.alpha_at(y)) {
        // operators coincide when both alpha and kappa(.,z) match at x and y
        bool same_kappa = true;
        for (double r : {0.1, 0.7, 2.5})
            if (std::abs(spec.kappa.eval_radial(x, r, spec.dim) -
                         spec.kappa.eval_radial(y, r, spec.dim)) > 0.0)
                same_kappa = false;
        if (same_kappa && norm(x - y, spec.dim) == 0.0) return 0.0;
        if (same_kappa && spec.constant_coefficients()) return 0.0;
    }
    if (!family) family = StableFamily::build(spec.dim, spec.alpha_lo, spec.alpha_hi);
    FrozenSymbol sym = build_symbol(spec, y, family);

    double ax = spec.alpha_at(x), ay = spec.alpha_at(y);
    Point v = x - y;
    auto mesh = log_mesh(1e-5, 50.0, 400);
    double acc = 0.0;
    const GaussRule& ang = gauss_rule(8);
    double pc = density(sym, t, v);
    for (std::size_t k = 0; k < mesh.size(); ++k) {
        double w = mesh[k];
        double dl = std::log(mesh[std::min(k + 1, mesh.size() - 1)]) -
                    std::log(mesh[k == 0 ? 0 : k - 1]);
        double quadw = 0.5 * dl * w;
        double dkern = spec.kappa.eval_radial(x, w, spec.dim) * std::pow(w, -spec.dim - ax) -
                       spec.kappa.eval_radial(y, w, spec.dim) * std::pow(w, -spec.dim - ay);
        if (spec.dim == 1) {
            double dd = density(sym, t, pt(v[0] - w)) + density(sym, t, pt(v[0] + w)) - 2.0 * pc;
            acc += dd * dkern * quadw;
        } else {
            double mean = 0.0;
            for (std::size_t q = 0; q < ang.x.size(); ++q) {
                double th = 0.5 * M_PI * (1.0 + ang.x[q]);
                Point zz = {w * std::cos(th), w * std::sin(th)};
                mean += 0.5 * ang.w[q] *
                        (density(sym, t, v + zz) + density(sym, t, v - zz) - 2.0 * pc);
            }
            acc += M_PI * mean * dkern * w * quadw;
        }
    }
    double ring = spec.dim == 1 ? 1.0 : M_PI;
    double w50x = spec.kappa.eval_radial(x, 50.0, spec.dim) * std::pow(50.0, -ax) / ax;
    double w50y = spec.kappa.eval_radial(y, 50.0, spec.dim) * std::pow(50.0, -ay) / ay;
    acc += -2.0 * pc * ring * (w50x - w50y);
    return acc;
}

ParametrixState solve_q(const ModelSpec& spec, const SpaceTimeGrid& grid,
                        const std::vector<Point>& y_targets, double tol, int n_max) {
    SolverOptions opt;
    opt.tol = tol;
    opt.n_max = n_max;
    ParametrixSolver solver(spec, grid, opt);
    return solver.solve(y_targets);
}

HeatKernelField assemble_kernel(const ModelSpec& spec, const SpaceTimeGrid& grid,
                                const std::vector<Point>& y_targets, const SolverOptions& opt) {
    ParametrixSolver solver(spec, grid, opt);
    auto st = solver.solve(y_targets);
    if (!st.converged) throw NumericsError("assemble_kernel: Picard iteration did not converge");
    return solver.assemble(st);
}

double near_unit_mass_p_y(const ModelSpec& spec, double t, const Point& x,
                          std::shared_ptr<const StableFamily> family) {
    if (!family) family = StableFamily::build(spec.dim, spec.alpha_lo, spec.alpha_hi);
    return near_unit_mass_defect(spec, *family, t, x);
}

} // namespace varheat
