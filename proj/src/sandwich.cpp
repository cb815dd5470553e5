#include "peerfx/sandwich.hpp"

#include "peerfx/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace peerfx {

Eigen::Index StackedModel::dim() const {
    Eigen::Index d = theta_dim();
    for (const auto& b : blocks) d += b.columns();
    return d;
}

Eigen::Index StackedModel::block_offset(std::size_t block) const {
    Eigen::Index off = theta_dim();
    for (std::size_t b = 0; b < block; ++b) off += blocks[b].columns();
    return off;
}

std::vector<std::string> StackedModel::coordinate_names() const {
    std::vector<std::string> names;
    if (include_theta) names = theta_names;
    for (const auto& b : blocks) {
        for (const auto& c : b.column_names()) names.push_back(b.label() + ":" + c);
    }
    return names;
}

NameshipParams StackedModel::theta_at(const Eigen::VectorXd& rho) const {
    if (!include_theta) return fixed_theta;
    NameshipParams p;
    p.theta1 = rho.head(n_theta1);
    p.theta2 = rho.segment(n_theta1, n_theta2);
    return p;
}

StackedEstimate stack_estimates(const MleReport& nameship, std::span<const OutcomeFit> fits,
                                const FrameLayout& layout) {
    StackedEstimate out;
    out.model.n_theta1 = nameship.theta_hat.theta1.size();
    out.model.n_theta2 = nameship.theta_hat.theta2.size();
    out.model.include_theta = true;
    out.model.theta_names = nameship_coordinate_names(layout);
    if (static_cast<Eigen::Index>(out.model.theta_names.size()) != nameship.theta_hat.size()) {
        fail(ErrorKind::invalid_argument, "nameship estimate does not match the frame layout");
    }
    for (const auto& f : fits) out.model.blocks.push_back(f.spec);
    out.rho_hat.resize(out.model.dim());
    out.rho_hat.head(nameship.theta_hat.size()) = nameship.theta_hat.stacked();
    for (std::size_t b = 0; b < fits.size(); ++b) {
        out.rho_hat.segment(out.model.block_offset(b), fits[b].coef.size()) = fits[b].coef;
    }
    return out;
}

StackedEstimate stack_beta_only(std::span<const OutcomeFit> fits, const NameshipParams* fixed_theta) {
    StackedEstimate out;
    out.model.include_theta = false;
    for (const auto& f : fits) {
        if (f.spec.homophily && fixed_theta == nullptr) {
            fail(ErrorKind::invalid_argument, "adjusted fits need the plug-in nameship parameters");
        }
        out.model.blocks.push_back(f.spec);
    }
    if (fixed_theta != nullptr) {
        out.model.fixed_theta = *fixed_theta;
        out.model.n_theta1 = fixed_theta->theta1.size();
        out.model.n_theta2 = fixed_theta->theta2.size();
    }
    out.rho_hat.resize(out.model.dim());
    for (std::size_t b = 0; b < fits.size(); ++b) {
        out.rho_hat.segment(out.model.block_offset(b), fits[b].coef.size()) = fits[b].coef;
    }
    return out;
}

namespace {

double inverse_link(Link link, double eta) {
    return link == Link::additive ? eta : std::exp(eta);
}

void evaluate_into(const StackedModel& model, const Eigen::VectorXd& rho, const AnalysisFrame& frame,
                   Eigen::VectorXd& g, Eigen::VectorXd& row) {
    g.setZero(model.dim());
    const NameshipParams theta = model.theta_at(rho);
    if (model.include_theta) {
        g.head(model.theta_dim()) = score_contribution(theta, frame);
    }
    for (std::size_t b = 0; b < model.blocks.size(); ++b) {
        const auto& spec = model.blocks[b];
        if (!spec.includes(frame)) continue;
        const Eigen::Index p = spec.columns();
        const Eigen::Index off = model.block_offset(b);
        row.resize(p);
        design_row(spec, frame, &theta, row);
        const double mu = inverse_link(spec.link, row.dot(rho.segment(off, p)));
        g.segment(off, p) = row * (frame.y - mu);
    }
}

}  // namespace

Eigen::VectorXd estimating_function(const StackedModel& model, const Eigen::VectorXd& rho,
                                    const AnalysisFrame& frame) {
    if (rho.size() != model.dim()) {
        fail(ErrorKind::invalid_argument, "rho has dimension " + std::to_string(rho.size()) +
                                              ", the stacked model expects " +
                                              std::to_string(model.dim()));
    }
    if (frame.s.code() == 0) {
        fail(ErrorKind::invalid_argument, "dyad " + frame.id + " has nameship type 0");
    }
    Eigen::VectorXd g;
    Eigen::VectorXd row;
    evaluate_into(model, rho, frame, g, row);
    return g;
}

Eigen::VectorXd SandwichCov::standard_errors() const {
    return (sigma.diagonal() / static_cast<double>(n)).cwiseMax(0.0).cwiseSqrt();
}

Eigen::Index SandwichCov::index_of(const std::string& name) const {
    auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) fail(ErrorKind::invalid_argument, "no coordinate named '" + name + "'");
    return static_cast<Eigen::Index>(it - names.begin());
}

double SandwichCov::se(const std::string& name) const {
    const auto i = index_of(name);
    return std::sqrt(std::max(0.0, sigma(i, i) / static_cast<double>(n)));
}

SandwichCov sandwich_cov(std::span<const AnalysisFrame> frames, const StackedModel& model,
                         const Eigen::VectorXd& rho_hat, const SandwichOptions& options) {
    const Eigen::Index dim = model.dim();
    if (rho_hat.size() != dim) fail(ErrorKind::invalid_argument, "rho_hat does not match the model");
    if (static_cast<Eigen::Index>(frames.size()) <= dim) {
        fail(ErrorKind::insufficient_data, "sandwich covariance needs more dyads than parameters");
    }
    if (!(options.relative_step > 0.0)) fail(ErrorKind::invalid_argument, "step must be positive");

    std::vector<std::size_t> order(frames.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return frames[i].id < frames[j].id; });

    Eigen::VectorXd steps(dim);
    for (Eigen::Index j = 0; j < dim; ++j) {
        steps[j] = options.relative_step * std::max(1.0, std::abs(rho_hat[j]));
    }

    // Coordinate -> owning beta block (-1 for theta).
    std::vector<int> owner(static_cast<std::size_t>(dim), -1);
    for (std::size_t b = 0; b < model.blocks.size(); ++b) {
        const Eigen::Index off = model.block_offset(b);
        for (Eigen::Index j = 0; j < model.blocks[b].columns(); ++j) {
            owner[static_cast<std::size_t>(off + j)] = static_cast<int>(b);
        }
    }

    Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(dim, dim);
    Eigen::MatrixXd jac_sum = Eigen::MatrixXd::Zero(dim, dim);
    Eigen::VectorXd g_sum = Eigen::VectorXd::Zero(dim);
    Eigen::VectorXd g, gp, gm, row;
    Eigen::VectorXd point = rho_hat;
    const NameshipParams theta_hat = model.theta_at(rho_hat);

    for (std::size_t i : order) {
        const AnalysisFrame& f = frames[i];
        if (f.s.code() == 0) fail(ErrorKind::invalid_argument, "dyad " + f.id + " has nameship type 0");
        evaluate_into(model, rho_hat, f, g, row);
        if (!g.allFinite()) fail(ErrorKind::numeric, "non-finite estimating function at dyad " + f.id);
        g_sum += g;
        meat.noalias() += g * g.transpose();
        for (Eigen::Index j = 0; j < dim; ++j) {
            const int b = owner[static_cast<std::size_t>(j)];
            if (b >= 0 && !model.blocks[static_cast<std::size_t>(b)].includes(f)) continue;
            if (b >= 0 && options.analytic_beta) continue;
            const double h = steps[j];
            point[j] = rho_hat[j] + h;
            evaluate_into(model, point, f, gp, row);
            point[j] = rho_hat[j] - h;
            evaluate_into(model, point, f, gm, row);
            point[j] = rho_hat[j];
            jac_sum.col(j) += (gp - gm) / (2.0 * h);
        }
        if (options.analytic_beta) {
            for (std::size_t b = 0; b < model.blocks.size(); ++b) {
                const auto& spec = model.blocks[b];
                if (!spec.includes(f)) continue;
                const Eigen::Index p = spec.columns();
                const Eigen::Index off = model.block_offset(b);
                row.resize(p);
                design_row(spec, f, &theta_hat, row);
                const double w = spec.link == Link::additive ? 1.0 : std::exp(row.dot(rho_hat.segment(off, p)));
                jac_sum.block(off, off, p, p).noalias() -= w * row * row.transpose();
            }
        }
    }

    const double n = static_cast<double>(frames.size());
    SandwichCov out;
    out.rho_hat = rho_hat;
    out.names = model.coordinate_names();
    out.n = frames.size();
    out.meat = meat / n;
    out.bread = -jac_sum / n;
    out.root_residual = (g_sum / n).lpNorm<Eigen::Infinity>();
    if (!out.bread.allFinite()) fail(ErrorKind::numeric, "non-finite finite-difference Jacobian");

    Eigen::VectorXd scale = out.bread.diagonal().cwiseAbs().cwiseSqrt();
    for (Eigen::Index j = 0; j < dim; ++j) {
        if (!(scale[j] > 0.0)) {
            fail(ErrorKind::singular_bread, "bread matrix has a zero diagonal entry at " +
                                                out.names[static_cast<std::size_t>(j)]);
        }
    }
    const Eigen::MatrixXd equilibrated =
        scale.cwiseInverse().asDiagonal() * out.bread * scale.cwiseInverse().asDiagonal();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(equilibrated);
    const auto& sv = svd.singularValues();
    const double rcond = sv.minCoeff() / sv.maxCoeff();
    if (!(rcond > 1e-13)) {
        std::ostringstream msg;
        msg << "bread matrix U is singular: condition number " << (1.0 / rcond)
            << " after diagonal equilibration (largest/smallest singular value " << sv.maxCoeff()
            << "/" << sv.minCoeff() << ")";
        fail(ErrorKind::singular_bread, msg.str());
    }

    Eigen::PartialPivLU<Eigen::MatrixXd> lu(out.bread);
    const Eigen::MatrixXd left = lu.solve(out.meat);                       // U^-1 V
    Eigen::MatrixXd sigma = lu.solve(left.transpose()).transpose();        // U^-1 V U^-T
    sigma = 0.5 * (sigma + sigma.transpose());
    if (options.small_sample) sigma *= n / (n - static_cast<double>(dim));
    out.sigma = sigma;
    return out;
}

Eigen::MatrixXd analytic_beta_bread(std::span<const AnalysisFrame> frames, const StackedModel& model,
                                    const Eigen::VectorXd& rho, std::size_t block) {
    if (block >= model.blocks.size()) fail(ErrorKind::invalid_argument, "no such beta block");
    const auto& spec = model.blocks[block];
    const Eigen::Index p = spec.columns();
    const Eigen::Index off = model.block_offset(block);
    const NameshipParams theta = model.theta_at(rho);
    Eigen::MatrixXd u = Eigen::MatrixXd::Zero(p, p);
    Eigen::VectorXd row(p);
    for (const auto& f : frames) {
        if (!spec.includes(f)) continue;
        design_row(spec, f, &theta, row);
        const double w = spec.link == Link::additive ? 1.0 : std::exp(row.dot(rho.segment(off, p)));
        u.noalias() += w * row * row.transpose();
    }
    return u / static_cast<double>(frames.size());
}

Eigen::MatrixXd jacobian_fd(const VectorFunction& f, const Eigen::VectorXd& x, double step) {
    if (!(step > 0.0)) fail(ErrorKind::invalid_argument, "finite-difference step must be positive");
    Eigen::VectorXd point = x;
    Eigen::MatrixXd jac;
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        const double h = step * std::max(1.0, std::abs(x[j]));
        point[j] = x[j] + h;
        const Eigen::VectorXd fp = f(point);
        point[j] = x[j] - h;
        const Eigen::VectorXd fm = f(point);
        point[j] = x[j];
        if (!fp.allFinite() || !fm.allFinite()) {
            fail(ErrorKind::numeric, "non-finite function value in finite differences at coordinate " +
                                         std::to_string(j));
        }
        if (j == 0) jac.resize(fp.size(), x.size());
        jac.col(j) = (fp - fm) / (2.0 * h);
    }
    return jac;
}

}  // namespace peerfx
