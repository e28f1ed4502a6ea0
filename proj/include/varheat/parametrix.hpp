#pragma once

#include <Eigen/Dense>

#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "varheat/model.hpp"
#include "varheat/stable_density.hpp"

namespace varheat {

struct SolverOptions {
    double gamma = -1.0; // envelope / weight exponent; < 0 means beta0 / (4 alpha_2)
    double tol = 1e-6;   // Picard sup-norm stopping tolerance
    int n_max = 20;
    // universal log mesh for the fused q0 quadrature
    double w_min = 1e-5, w_max = 50.0;
    int w_nodes = 320;
};

// ---------------------------------------------------------------------------
// Q0Field: q0(t,x,z) tabulated on the graded solve mesh x lattice x lattice.
// Slice 0 holds the t->0 pointwise limit (the kernel-difference matrix).
// Column-major n x n maps: entry (i,k) = q0(tau_m, x_i, z_k).
// ---------------------------------------------------------------------------
struct Q0Field {
    std::vector<double> mesh; // tau_0 = 0 < ... <= 1
    std::size_t n = 0;
    std::vector<std::vector<double>> slices; // [m], column-major n*n
    double quad_scale = 0.0;                 // coarse magnitude for error reporting

    Eigen::Map<const Eigen::MatrixXd> slice(std::size_t m) const {
        return {slices[m].data(), Eigen::Index(n), Eigen::Index(n)};
    }
};

struct ParametrixState {
    std::vector<double> mesh;
    std::vector<Point> y_targets;
    std::vector<Eigen::MatrixXd> q;     // per mesh index, n x ny; q[0] is the tau->0 limit
    std::vector<double> delta_sup;      // per Picard iteration, sup over (t,x,y)
    std::vector<double> delta_sup_by_t; // last iteration, per mesh node
    int iterations = 0;
    bool converged = false;
};

// ---------------------------------------------------------------------------
// HeatKernelField: p(t,x,y) = p^y(t,x-y) + corr(t,x,y), with the correction
// stored on mesh times x lattice x y-targets and interpolated (linear in
// sqrt(t), cubic in x and y). y_targets must be a uniform subgrid of the
// lattice.
// ---------------------------------------------------------------------------
class HeatKernelField {
public:
    ModelSpec spec;
    SpaceTimeGrid grid;
    std::vector<double> mesh;
    std::vector<Point> y_targets;
    std::vector<Eigen::MatrixXd> corr; // [mesh index m >= 1], n x ny
    std::shared_ptr<const StableFamily> family;

    // provenance
    std::uint64_t model_hash = 0, grid_hash = 0;
    double solver_tol = 0.0;
    int iterations = 0;
    long clamped_negatives = 0;

    double frozen_part(double t, const Point& x, const Point& y) const;
    double correction(double t, const Point& x, const Point& y) const;
    double correction_dt(double t, const Point& x, const Point& y) const;
    double eval(double t, const Point& x, const Point& y) const;
    double eval_dt(double t, const Point& x, const Point& y) const;

    void write_csv(const std::string& path) const;
    void write_sidecar(const std::string& path, const std::string& config_hash) const;

private:
    double corr_at_mesh(std::size_t m, const Point& x, const Point& y) const;

    struct SymbolCacheMap {
        std::mutex mtx;
        std::map<long long, FrozenSymbol> map;
    };
    std::shared_ptr<SymbolCacheMap> symcache_ = std::make_shared<SymbolCacheMap>();
};

// ---------------------------------------------------------------------------
// solver
// ---------------------------------------------------------------------------

class ParametrixSolver {
public:
    ParametrixSolver(ModelSpec spec, SpaceTimeGrid grid, SolverOptions opt = {});

    const std::vector<double>& mesh() const { return mesh_; }
    const Q0Field& q0_field();

    ParametrixState solve(const std::vector<Point>& y_targets);
    HeatKernelField assemble(const ParametrixState& state);

    // |int p(t,x,y) dy - 1| through the y-integrated Volterra column; avoids
    // materialising a dense y-grid of kernel columns.
    std::vector<double> conservativeness_defect(const std::vector<double>& ts,
                                                const std::vector<Point>& xs);

    // sup-norm of q - q0 - q0 (*) q on the grid for a solved state
    double picard_residual(const ParametrixState& state);

    double gamma_sing() const { return gamma_sing_; }
    double mass_mu(double t, const Point& x); // int p^y(t, x-y) dy, cached on mesh

    std::shared_ptr<const StableFamily> family() const { return family_; }

private:
    void build_mesh();
    void build_w_mesh();
    void build_q0_tensor();
    void q0_row(double tau, std::size_t zi, double* out); // out[i] = q0(tau, x_i, z_zi)
    void k0_row(std::size_t zi, double* out);
    std::vector<double> blended_profile(double alpha) const;
    void time_blend(double tau, std::size_t& m0, std::size_t& m1, double& f) const;

    // product-integration node weights for output index j:
    // wq: q-equation (both endpoints weighted), wp: assembly (s = t kept)
    std::vector<std::vector<double>> wq_, wp_;

    // q0-kernel convolution pass shared by solve(), picard_residual() and the
    // conservativeness column
    void kernel_action(const std::vector<Eigen::MatrixXd>& qs, std::size_t j,
                       Eigen::MatrixXd& out, std::vector<double>& kbuf);

    ModelSpec spec_;
    SpaceTimeGrid grid_;
    SolverOptions opt_;
    double gamma_sing_ = 0.0, weight_exp_ = 0.0;
    std::vector<double> mesh_, sqrt_mesh_;
    std::vector<Point> xs_;
    std::size_t n_ = 0;
    std::shared_ptr<const StableFamily> family_;
    Q0Field q0_;
    bool q0_built_ = false;

    // universal log w-mesh and per-lattice-point kernel tables
    std::vector<double> w_nodes_, w_weights_, ln_w_;
    std::vector<double> kx_table_; // [i * W + k] = kappa(x_i, w_k) w_k^{-d-alpha(x_i)}
    std::vector<double> alpha_lat_, mult_lat_;
    std::vector<std::vector<double>> prof_lat_; // blended stable profile per lattice point
    double prof_du_ = 0.0;

    // z-dependent kappa path: frozen symbols per lattice point
    std::vector<FrozenSymbol> symbols_;

    std::vector<std::vector<double>> mu_; // [m][i] moving-freeze mass on mesh
    bool mu_built_ = false;
    void build_mu();

    friend struct ParametrixAccess;
};

// ---------------------------------------------------------------------------
// spec-level operations
// ---------------------------------------------------------------------------

// Fused single-point q0 evaluation (kernel-difference quadrature).
double compute_q0(const ModelSpec& spec, double t, const Point& x, const Point& y,
                  std::shared_ptr<const StableFamily> family = nullptr);

ParametrixState solve_q(const ModelSpec& spec, const SpaceTimeGrid& grid,
                        const std::vector<Point>& y_targets, double tol, int n_max);

HeatKernelField assemble_kernel(const ModelSpec& spec, const SpaceTimeGrid& grid,
                                const std::vector<Point>& y_targets, const SolverOptions& opt);

// |int p^y(t, x-y) dy - 1| (the freeze point moves with the integration variable)
double near_unit_mass_p_y(const ModelSpec& spec, double t, const Point& x,
                          std::shared_ptr<const StableFamily> family = nullptr);

} // namespace varheat
