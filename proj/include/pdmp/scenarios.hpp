#pragma once

// Scenario descriptions: the built-in reproductions of the worked examples
// (constants stored as exact rationals) and JSON-configured custom runs.

#include "pdmp/engine.hpp"
#include "pdmp/lyapunov.hpp"
#include "pdmp/vectorfields.hpp"

#include <json.hpp>

#include <cstdint>
#include <initializer_list>
#include <optional>
#include <string>
#include <vector>

namespace pdmp {

/// Exact rational constant, converted to double once.
struct Rational {
    long long num = 0;
    long long den = 1;
    [[nodiscard]] constexpr double value() const { return static_cast<double>(num) / static_cast<double>(den); }
};

inline Matrix rational_matrix(std::initializer_list<std::initializer_list<Rational>> rows) {
    Matrix m(static_cast<Eigen::Index>(rows.size()),
             static_cast<Eigen::Index>(rows.begin()->size()));
    Eigen::Index i = 0;
    for (const auto& row : rows) {
        Eigen::Index j = 0;
        for (const auto& r : row) m(i, j++) = r.value();
        ++i;
    }
    return m;
}

inline Vector rational_vector(std::initializer_list<Rational> entries) {
    Vector v(static_cast<Eigen::Index>(entries.size()));
    Eigen::Index i = 0;
    for (const auto& r : entries) v(i++) = r.value();
    return v;
}

enum class SystemKind { LajmanovichYorke, Linear };

struct Scenario {
    std::string name;
    std::string description;
    SystemKind kind = SystemKind::LajmanovichYorke;
    std::vector<LajmanovichYorkeField> ly_fields;
    std::vector<Matrix> linear;     ///< used when kind == Linear
    Matrix base_rates;              ///< multiplied by beta
    double beta = 1.0;
    std::vector<Vector> initial_states;
    int initial_mode = 0;
    double horizon = 1000.0;
    std::size_t replicates = 20;
    std::uint64_t seed = 1;
    double lyapunov_horizon = 1000.0;
    std::size_t lyapunov_replicates = 100;
    IntegratorConfig integrator;
    std::vector<std::string> diagnostics;

    [[nodiscard]] std::size_t modes() const {
        return kind == SystemKind::Linear ? linear.size() : ly_fields.size();
    }
    [[nodiscard]] Eigen::Index dim() const {
        return kind == SystemKind::Linear ? linear.front().rows() : ly_fields.front().dim();
    }

    [[nodiscard]] RateMatrix rates() const { return RateMatrix(base_rates).scaled(beta); }

    [[nodiscard]] SwitchedFieldFamily family() const {
        if (kind == SystemKind::Linear) {
            return SwitchedFieldFamily::from_linear(linear, Box::orthant(dim()));
        }
        return SwitchedFieldFamily::from_ly(ly_fields);
    }

    [[nodiscard]] SwitchedSystem system() const { return SwitchedSystem(family(), rates()); }

    /// Jacobians at the common zero.
    [[nodiscard]] std::vector<Matrix> jacobians() const {
        if (kind == SystemKind::Linear) return linear;
        std::vector<Matrix> out;
        for (const auto& f : ly_fields) out.push_back(f.linearization());
        return out;
    }

    /// Linearization at the origin; the orthant cone is used when every
    /// A^i is Metzler.
    [[nodiscard]] LinearSwitchedSystem linearization() const {
        auto as = jacobians();
        bool metzler = true;
        for (const auto& a : as) metzler = metzler && is_metzler(a);
        return LinearSwitchedSystem(std::move(as), rates(),
                                    metzler ? ConeTag::NonnegativeOrthant : ConeTag::FullSpace);
    }

    /// Throws ConfigError on a degenerate configuration.
    void validate() const {
        if (name.empty()) throw ConfigError("scenario: name is required");
        if (modes() == 0) throw ConfigError("scenario " + name + ": no vector fields");
        if (replicates == 0) throw ConfigError("scenario " + name + ": replicates must be >= 1");
        if (lyapunov_replicates == 0) {
            throw ConfigError("scenario " + name + ": lyapunov replicates must be >= 1");
        }
        if (!(horizon > 0.0) || !(lyapunov_horizon > 0.0)) {
            throw ConfigError("scenario " + name + ": horizons must be positive");
        }
        if (!(beta > 0.0)) throw ConfigError("scenario " + name + ": beta must be positive");
        if (base_rates.rows() != static_cast<Eigen::Index>(modes()) ||
            base_rates.cols() != static_cast<Eigen::Index>(modes())) {
            throw ConfigError("scenario " + name + ": rate matrix size does not match mode count");
        }
        if (initial_states.empty()) throw ConfigError("scenario " + name + ": no initial state");
        for (const auto& x : initial_states) {
            if (x.size() != dim()) throw ConfigError("scenario " + name + ": initial state dimension");
            if (kind == SystemKind::LajmanovichYorke && !Box::unit_cube(dim()).contains(x)) {
                throw ConfigError("scenario " + name + ": initial state outside the unit cube");
            }
        }
        if (initial_mode < 0 || static_cast<std::size_t>(initial_mode) >= modes()) {
            throw ConfigError("scenario " + name + ": initial mode out of range");
        }
        integrator.validate();
        try {
            (void)RateMatrix(base_rates);
        } catch (const Error& e) {
            throw ConfigError("scenario " + name + ": " + e.what());
        }
    }
};

inline Matrix two_mode_rates() { return rational_matrix({{{0}, {1}}, {{1}, {0}}}); }

inline std::vector<Matrix> fmg3d_matrices() {
    return {rational_matrix({{{-1}, {0}, {0}}, {{10}, {-1}, {0}}, {{0}, {0}, {-10}}}),
            rational_matrix({{{-10}, {0}, {10}}, {{0}, {-10}, {0}}, {{0}, {10}, {-1}}})};
}

inline Scenario make_ainscosta() {
    Scenario s;
    s.name = "ainscosta";
    s.description = "Two endemic SIS fields whose random switching drives the disease to extinction";
    s.ly_fields = {
        {rational_matrix({{{2}, {1}}, {{1}, {1}}}), rational_vector({{6}, {1}})},
        {rational_matrix({{{1}, {1}}, {{1}, {3}}}), rational_vector({{1}, {7}})}};
    s.base_rates = two_mode_rates();
    s.beta = 20.0;
    s.initial_states = {rational_vector({{1, 2}, {1, 2}})};
    s.diagnostics = {"eigen", "equilibrium", "lyapunov", "bounds", "trajectory", "extinction",
                     "occupation", "tail"};
    return s;
}

inline Scenario make_astacoins() {
    Scenario s;
    s.name = "astacoins";
    s.description = "Two SIS fields with a stable disease-free state whose switching makes the disease persist";
    s.ly_fields = {
        {rational_matrix({{{1}, {4}}, {{1, 16}, {1}}}), rational_vector({{2}, {2}})},
        {rational_matrix({{{2}, {1, 16}}, {{4}, {2}}}), rational_vector({{3}, {3}})}};
    s.base_rates = two_mode_rates();
    s.beta = 20.0;
    s.initial_states = {rational_vector({{1, 2}, {1, 2}})};
    s.diagnostics = {"eigen", "equilibrium", "hull", "lyapunov", "bounds", "trajectory",
                     "occupation", "tail", "hitting", "contraction"};
    return s;
}

inline Scenario make_fmg3d() {
    Scenario s;
    s.name = "fmg3d";
    s.description = "Three-dimensional Metzler pair with a Hurwitz convex hull and growth under switching";
    s.kind = SystemKind::Linear;
    s.linear = fmg3d_matrices();
    s.base_rates = two_mode_rates();
    s.beta = 10.0;
    s.initial_states = {rational_vector({{1}, {1}, {1}})};
    s.horizon = 20.0;
    s.diagnostics = {"eigen", "hull", "period", "lyapunov", "bounds", "trajectory"};
    return s;
}

inline Scenario make_ly3d() {
    Scenario s;
    s.name = "ly3d";
    s.description = "Three-group SIS fields built on the fmg3d linearization; persistence under switching";
    const auto as = fmg3d_matrices();
    const Vector d0 = rational_vector({{11}, {11}, {20}});
    const Vector d1 = rational_vector({{20}, {20}, {11}});
    Matrix c0 = as[0];
    c0.diagonal() += d0;
    Matrix c1 = as[1];
    c1.diagonal() += d1;
    s.ly_fields = {{c0, d0}, {c1, d1}};
    s.base_rates = two_mode_rates();
    s.beta = 10.0;
    s.initial_states = {rational_vector({{1, 10}, {1, 10}, {1, 10}})};
    s.diagnostics = {"eigen", "hull", "lyapunov", "bounds", "trajectory", "occupation", "tail"};
    return s;
}

inline Scenario make_nobra() {
    Scenario s;
    s.name = "nobra";
    s.description = "Two SIS fields sharing the interior equilibrium (1/2, 1/2)";
    s.ly_fields = {
        {rational_matrix({{{1}, {3}}, {{2}, {4}}}), rational_vector({{2}, {3}})},
        {rational_matrix({{{6}, {2}}, {{7}, {3}}}), rational_vector({{4}, {5}})}};
    s.base_rates = two_mode_rates();
    s.beta = 1.0;
    s.initial_states = {rational_vector({{9, 10}, {1, 5}})};
    s.horizon = 200.0;
    s.diagnostics = {"eigen", "equilibrium", "lyapunov", "bounds", "trajectory", "extinction"};
    return s;
}

/// The five built-in scenarios.
inline std::vector<Scenario> registry() {
    return {make_ainscosta(), make_astacoins(), make_fmg3d(), make_ly3d(), make_nobra()};
}

inline std::optional<Scenario> find_scenario(const std::string& name) {
    for (auto& s : registry()) {
        if (s.name == name) return s;
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// JSON configuration
// ---------------------------------------------------------------------------

/// Scenario from a JSON document. Either "scenario" names a built-in that
/// the remaining keys override, or the system is given in full by "fields"
/// (list of {"C", "D"}) or "linear" (list of matrices) plus "rates".
inline Scenario scenario_from_json(const nlohmann::json& j) {
    Scenario s;
    try {
        if (j.contains("scenario")) {
            const auto name = j.at("scenario").get<std::string>();
            auto found = find_scenario(name);
            if (!found) throw ConfigError("config: unknown scenario '" + name + "'");
            s = *found;
        }
        if (j.contains("name")) s.name = j.at("name").get<std::string>();
        if (j.contains("fields")) {
            s.kind = SystemKind::LajmanovichYorke;
            s.ly_fields.clear();
            s.linear.clear();
            for (const auto& f : j.at("fields")) s.ly_fields.push_back(ly_from_json(f));
        }
        if (j.contains("linear")) {
            s.kind = SystemKind::Linear;
            s.ly_fields.clear();
            s.linear.clear();
            for (const auto& m : j.at("linear")) s.linear.push_back(matrix_from_json(m));
        }
        if (j.contains("rates")) s.base_rates = matrix_from_json(j.at("rates"));
        if (j.contains("beta")) s.beta = j.at("beta").get<double>();
        if (j.contains("x0")) {
            s.initial_states.clear();
            const auto& x0 = j.at("x0");
            if (!x0.empty() && x0.front().is_array()) {
                for (const auto& x : x0) s.initial_states.push_back(vector_from_json(x));
            } else {
                s.initial_states.push_back(vector_from_json(x0));
            }
        }
        if (j.contains("i0")) s.initial_mode = j.at("i0").get<int>();
        if (j.contains("horizon")) s.horizon = j.at("horizon").get<double>();
        if (j.contains("replicates")) {
            const auto r = j.at("replicates").get<long long>();
            if (r < 0) throw ConfigError("config: replicates must be nonnegative");
            s.replicates = static_cast<std::size_t>(r);
        }
        if (!j.contains("seed") && !j.contains("scenario")) {
            throw ConfigError("config: \"seed\" is mandatory");
        }
        if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("lyapunov")) {
            const auto& l = j.at("lyapunov");
            if (l.contains("horizon")) s.lyapunov_horizon = l.at("horizon").get<double>();
            if (l.contains("replicates")) {
                const auto r = l.at("replicates").get<long long>();
                if (r < 0) throw ConfigError("config: lyapunov replicates must be nonnegative");
                s.lyapunov_replicates = static_cast<std::size_t>(r);
            }
        }
        if (j.contains("step")) s.integrator.step = j.at("step").get<double>();
        if (j.contains("sample_stride")) {
            s.integrator.sample_stride = j.at("sample_stride").get<std::size_t>();
        }
        if (j.contains("diagnostics")) {
            s.diagnostics = j.at("diagnostics").get<std::vector<std::string>>();
        }
        if (j.contains("description")) s.description = j.at("description").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    s.validate();
    return s;
}

inline nlohmann::json scenario_to_json(const Scenario& s) {
    nlohmann::json j;
    j["name"] = s.name;
    j["description"] = s.description;
    if (s.kind == SystemKind::Linear) {
        j["linear"] = nlohmann::json::array();
        for (const auto& m : s.linear) j["linear"].push_back(matrix_to_json(m));
    } else {
        j["fields"] = nlohmann::json::array();
        for (const auto& f : s.ly_fields) j["fields"].push_back(f);
    }
    j["rates"] = matrix_to_json(s.base_rates);
    j["beta"] = s.beta;
    j["x0"] = nlohmann::json::array();
    for (const auto& x : s.initial_states) j["x0"].push_back(std::vector<double>(x.begin(), x.end()));
    j["i0"] = s.initial_mode;
    j["horizon"] = s.horizon;
    j["replicates"] = s.replicates;
    j["seed"] = s.seed;
    j["lyapunov"] = {{"horizon", s.lyapunov_horizon}, {"replicates", s.lyapunov_replicates}};
    j["step"] = s.integrator.step;
    j["sample_stride"] = s.integrator.sample_stride;
    j["diagnostics"] = s.diagnostics;
    return j;
}

}  // namespace pdmp
