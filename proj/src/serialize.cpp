#include "prc/serialize.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "prc/errors.hpp"
#include "prc/version.hpp"

namespace prc::io {

namespace {

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// Wraps a json object for exact-schema reads: every accessed key is marked,
// finish() rejects whatever was not accessed, naming its path.
class StrictObject {
public:
    StrictObject(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw DomainError(path_ + ": expected an object");
    }

    const json* find(const std::string& key) {
        seen_.insert(key);
        auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    const json& require(const std::string& key) {
        const json* v = find(key);
        if (!v) throw DomainError(path_ + ": missing key '" + key + "'");
        return *v;
    }

    template <typename T>
    T get_or(const std::string& key, T fallback) {
        const json* v = find(key);
        if (!v) return fallback;
        return v->get<T>();
    }

    void allow(const std::string& key) { seen_.insert(key); }

    void finish() const {
        for (const auto& item : j_.items())
            if (!seen_.count(item.key()))
                throw DomainError(path_ + ": unknown key '" + item.key() + "'");
    }

    const std::string& path() const { return path_; }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

void set_if_finite(json& j, const char* key, double v) {
    if (std::isfinite(v)) j[key] = v;
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string::size_type start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

double parse_double(const std::string& token, long line_no) {
    char* end = nullptr;
    const double v = std::strtod(token.c_str(), &end);
    if (end == token.c_str() || *end != '\0')
        throw DomainError("line " + std::to_string(line_no) + ": malformed number '" + token + "'");
    return v;
}

}  // namespace

json matrix_to_json(const MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

MatrixXd matrix_from_json(const json& j, const std::string& what) {
    if (!j.is_array() || j.empty() || !j[0].is_array())
        throw DomainError(what + ": expected a nested array");
    const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
    const Eigen::Index cols = static_cast<Eigen::Index>(j[0].size());
    MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        if (!j[r].is_array() || static_cast<Eigen::Index>(j[r].size()) != cols)
            throw DomainError(what + ": ragged rows");
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
    }
    return m;
}

json vector_to_json(const VectorXd& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
    return out;
}

VectorXd vector_from_json(const json& j, const std::string& what) {
    if (!j.is_array()) throw DomainError(what + ": expected an array");
    VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = j[i].get<double>();
    return v;
}

json law_to_json(const GaussianParameterLaw& law) {
    json j;
    j["schema"] = kArtifactSchema;
    j["d_x"] = law.d_x();
    j["d_u"] = law.d_u();
    j["mean"] = matrix_to_json(law.mean());
    j["covariance"] = matrix_to_json(law.covariance());
    if (law.has_kron_factors()) {
        j["kron_row_cov"] = matrix_to_json(law.kron_row_cov());
        j["kron_col_cov"] = matrix_to_json(law.kron_col_cov());
    }
    return j;
}

namespace {

GaussianParameterLaw law_from_strict(StrictObject& obj) {
    obj.allow("schema");
    obj.allow("provenance");
    const int d_x = obj.require("d_x").get<int>();
    const int d_u = obj.require("d_u").get<int>();
    const MatrixXd mean = matrix_from_json(obj.require("mean"), obj.path() + ".mean");
    const MatrixXd cov = matrix_from_json(obj.require("covariance"), obj.path() + ".covariance");
    std::optional<MatrixXd> row_cov, col_cov;
    if (const json* v = obj.find("kron_row_cov"))
        row_cov = matrix_from_json(*v, obj.path() + ".kron_row_cov");
    if (const json* v = obj.find("kron_col_cov"))
        col_cov = matrix_from_json(*v, obj.path() + ".kron_col_cov");
    return GaussianParameterLaw(d_x, d_u, mean, cov, row_cov, col_cov);
}

}  // namespace

GaussianParameterLaw law_from_json(const json& j) {
    StrictObject obj(j, "law");
    GaussianParameterLaw law = law_from_strict(obj);
    obj.finish();
    return law;
}

json truncated_law_to_json(const TruncatedLaw& tlaw) {
    json j = law_to_json(tlaw.base());
    j["credibility"] = tlaw.credibility();
    return j;
}

TruncatedLaw truncated_law_from_json(const json& j, std::optional<double> fallback_credibility) {
    StrictObject obj(j, "law");
    GaussianParameterLaw law = law_from_strict(obj);
    double credibility;
    if (const json* v = obj.find("credibility")) {
        credibility = v->get<double>();
    } else if (fallback_credibility) {
        credibility = *fallback_credibility;
    } else {
        throw DomainError("law: missing 'credibility' and no fallback provided");
    }
    obj.finish();
    return TruncatedLaw(std::move(law), credibility);
}

json profile_to_json(const RiskProfile& profile) {
    return json{{"c", profile.c},
                {"eps", profile.eps},
                {"beta", profile.beta},
                {"eps_val", profile.eps_val},
                {"alpha", profile.alpha}};
}

RiskProfile profile_from_json(const json& j) {
    StrictObject obj(j, "profile");
    RiskProfile p{obj.require("c").get<double>(), obj.require("eps").get<double>(),
                  obj.require("beta").get<double>(), obj.require("eps_val").get<double>(),
                  obj.require("alpha").get<double>()};
    obj.finish();
    p.validate();
    return p;
}

json controller_to_json(const CertifiedController& ctrl) {
    json j;
    j["schema"] = kArtifactSchema;
    j["gain"] = matrix_to_json(ctrl.k.k);
    j["profile"] = profile_to_json(ctrl.profile);
    j["m_scenarios"] = ctrl.m_scenarios;
    j["m_validation"] = ctrl.m_validation;
    j["empirical_stability"] = ctrl.empirical_stability;
    j["guaranteed_stability_prob"] = ctrl.guaranteed_stability_prob;
    j["confidence"] = ctrl.confidence;
    j["objective_trace"] = ctrl.objective_trace;
    j["seeds"] = json{{"root", ctrl.seeds.root},
                      {"scenario", ctrl.seeds.scenario},
                      {"validation", ctrl.seeds.validation}};
    j["attempts"] = ctrl.attempts;
    return j;
}

CertifiedController controller_from_json(const json& j) {
    StrictObject obj(j, "controller");
    obj.allow("schema");
    obj.allow("provenance");
    CertifiedController ctrl;
    ctrl.k = Gain{matrix_from_json(obj.require("gain"), "controller.gain")};
    ctrl.profile = profile_from_json(obj.require("profile"));
    ctrl.m_scenarios = obj.require("m_scenarios").get<long>();
    ctrl.m_validation = obj.require("m_validation").get<long>();
    ctrl.empirical_stability = obj.require("empirical_stability").get<double>();
    ctrl.guaranteed_stability_prob = obj.require("guaranteed_stability_prob").get<double>();
    ctrl.confidence = obj.require("confidence").get<double>();
    ctrl.objective_trace = obj.require("objective_trace").get<std::vector<double>>();
    StrictObject seeds(obj.require("seeds"), "controller.seeds");
    ctrl.seeds.root = seeds.require("root").get<std::uint64_t>();
    ctrl.seeds.scenario = seeds.require("scenario").get<std::uint64_t>();
    ctrl.seeds.validation = seeds.require("validation").get<std::uint64_t>();
    seeds.finish();
    ctrl.attempts = obj.get_or<int>("attempts", 1);
    obj.finish();
    return ctrl;
}

json validation_report_to_json(const ValidationReport& report) {
    json j;
    j["schema"] = kArtifactSchema;
    j["empirical_stability"] = report.empirical_stability;
    j["m_validation"] = report.m_validation;
    j["pass"] = report.pass;
    j["rho_min"] = report.rho_min;
    j["rho_median"] = report.rho_median;
    j["rho_max"] = report.rho_max;
    j["seed"] = report.seed;
    return j;
}

json dataset_to_json(const TransitionDataset& data) {
    json j;
    j["schema"] = kArtifactSchema;
    j["inputs"] = matrix_to_json(data.inputs);
    j["targets"] = matrix_to_json(data.targets);
    return j;
}

TransitionDataset dataset_from_json(const json& j) {
    StrictObject obj(j, "dataset");
    obj.allow("schema");
    obj.allow("provenance");
    TransitionDataset data;
    data.inputs = matrix_from_json(obj.require("inputs"), "dataset.inputs");
    data.targets = matrix_from_json(obj.require("targets"), "dataset.targets");
    obj.finish();
    data.validate();
    return data;
}

std::string dataset_to_csv(const TransitionDataset& data) {
    std::ostringstream out;
    const int d_q = data.input_dim();
    const int d_x = data.output_dim();
    for (int i = 1; i <= d_q; ++i) out << "q_" << i << ",";
    for (int i = 1; i <= d_x; ++i) out << "y_" << i << (i == d_x ? "" : ",");
    out << "\n";
    for (long r = 0; r < data.size(); ++r) {
        for (int c = 0; c < d_q; ++c) out << fmt17(data.inputs(r, c)) << ",";
        for (int c = 0; c < d_x; ++c) out << fmt17(data.targets(r, c)) << (c + 1 == d_x ? "" : ",");
        out << "\n";
    }
    return out.str();
}

TransitionDataset dataset_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    long line_no = 0;

    if (!std::getline(in, line)) throw DomainError("line 1: missing header");
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::vector<std::string> header = split(line, ',');
    int d_q = 0, d_x = 0;
    for (std::size_t i = 0; i < header.size(); ++i) {
        const std::string expected_q = "q_" + std::to_string(i + 1);
        const std::string expected_y = "y_" + std::to_string(i + 1 - d_q);
        if (header[i] == expected_q && d_x == 0) {
            ++d_q;
        } else if (header[i] == expected_y && d_q > 0) {
            ++d_x;
        } else {
            throw DomainError("line 1: unexpected header column '" + header[i] + "'");
        }
    }
    if (d_q == 0 || d_x == 0) throw DomainError("line 1: header must list q_* then y_* columns");

    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::vector<std::string> tokens = split(line, ',');
        if (static_cast<int>(tokens.size()) != d_q + d_x)
            throw DomainError("line " + std::to_string(line_no) + ": expected " +
                              std::to_string(d_q + d_x) + " fields, found " +
                              std::to_string(tokens.size()));
        std::vector<double> row;
        row.reserve(tokens.size());
        for (const auto& t : tokens) row.push_back(parse_double(t, line_no));
        rows.push_back(std::move(row));
    }

    TransitionDataset data;
    data.inputs.resize(static_cast<long>(rows.size()), d_q);
    data.targets.resize(static_cast<long>(rows.size()), d_x);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (int c = 0; c < d_q; ++c) data.inputs(static_cast<long>(r), c) = rows[r][static_cast<std::size_t>(c)];
        for (int c = 0; c < d_x; ++c)
            data.targets(static_cast<long>(r), c) = rows[r][static_cast<std::size_t>(d_q + c)];
    }
    data.validate();
    return data;
}

json record_to_json(const bench::ExperimentRecord& record) {
    json methods = json::array();
    for (const auto& m : record.methods) {
        json mj;
        mj["method"] = m.method;
        mj["feasible"] = m.feasible;
        if (!m.detail.empty()) mj["detail"] = m.detail;
        if (m.feasible) mj["gain"] = matrix_to_json(m.gain.k);
        set_if_finite(mj, "rho_reference", m.rho_reference);
        set_if_finite(mj, "mean_cost", m.mean_cost);
        set_if_finite(mj, "q25", m.q25);
        set_if_finite(mj, "q50", m.q50);
        set_if_finite(mj, "q75", m.q75);
        set_if_finite(mj, "instability_freq", m.instability_freq);
        set_if_finite(mj, "runtime_s", m.runtime_s);
        mj["raw_costs"] = m.raw_costs;
        mj["n_unstable"] = m.n_unstable;
        mj["n_samples"] = m.n_samples;
        if (m.certificate) mj["certificate"] = controller_to_json(*m.certificate);
        methods.push_back(std::move(mj));
    }
    json j;
    j["schema"] = kArtifactSchema;
    j["experiment"] = record.experiment;
    j["grid_value"] = record.grid_value;
    j["repetition"] = record.repetition;
    j["cell_seed"] = record.cell_seed;
    j["methods"] = std::move(methods);
    return j;
}

std::string experiment_csv(const std::vector<bench::ExperimentRecord>& records) {
    std::ostringstream out;
    out << "sigma_sq_or_rollouts,method,repetition,feasible,mean_cost,q25,q50,q75,"
           "instability_freq,runtime_s,seed\n";
    auto field = [](double v) { return std::isfinite(v) ? fmt17(v) : std::string(); };
    for (const auto& record : records) {
        for (const auto& m : record.methods) {
            out << fmt17(record.grid_value) << ',' << m.method << ',' << record.repetition << ','
                << (m.feasible ? 1 : 0) << ',' << field(m.mean_cost) << ',' << field(m.q25) << ','
                << field(m.q50) << ',' << field(m.q75) << ',' << field(m.instability_freq) << ','
                << field(m.runtime_s) << ',' << record.cell_seed << "\n";
        }
    }
    return out.str();
}

std::uint64_t json_content_hash(const json& j) {
    const std::string dump = j.dump();
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : dump) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string hash_hex(std::uint64_t h) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "0x%016llx", static_cast<unsigned long long>(h));
    return buf;
}

json provenance_json(std::uint64_t config_hash, std::uint64_t seed) {
    return json{{"schema", kArtifactSchema},
                {"code_version", kVersion},
                {"config_hash", hash_hex(config_hash)},
                {"seed", seed}};
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DomainError("cannot open '" + path.string() + "'");
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

void write_text_atomic(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw NumericalError("cannot write '" + tmp.string() + "'");
        out << content;
        out.flush();
        if (!out.good()) throw NumericalError("short write to '" + tmp.string() + "'");
    }
    std::filesystem::rename(tmp, path);
}

namespace {

GpSettings gp_from_json(const json& j) {
    StrictObject obj(j, "gp");
    GpSettings gp;
    gp.signal_variance = obj.get_or<double>("signal_variance", gp.signal_variance);
    if (const json* v = obj.find("lengthscales"))
        gp.lengthscales = vector_from_json(*v, "gp.lengthscales");
    if (const json* v = obj.find("noise_variances"))
        gp.noise_variances = vector_from_json(*v, "gp.noise_variances");
    gp.regress_deltas = obj.get_or<bool>("regress_deltas", false);
    obj.finish();
    return gp;
}

sdp::Settings solver_from_json(const json& j) {
    StrictObject obj(j, "solver");
    sdp::Settings s;
    s.feas_tol = obj.get_or<double>("feas_tol", s.feas_tol);
    s.gap_tol = obj.get_or<double>("gap_tol", s.gap_tol);
    s.max_iter = obj.get_or<long>("max_iter", s.max_iter);
    obj.finish();
    return s;
}

CostWeights weights_from_json(const json& j) {
    StrictObject obj(j, "weights");
    CostWeights w;
    w.q = matrix_from_json(obj.require("q"), "weights.q");
    w.r = matrix_from_json(obj.require("r"), "weights.r");
    w.sigma_w = MatrixXd(vector_from_json(obj.require("sigma_w_diag"), "weights.sigma_w_diag").asDiagonal());
    obj.finish();
    return w;
}

void experiment_from_json(const json& j, bench::ExperimentConfig& exp) {
    StrictObject obj(j, "experiment");
    exp.kind = obj.get_or<std::string>("kind", exp.kind);
    if (const json* v = obj.find("sigma_grid")) exp.sigma_grid = v->get<std::vector<double>>();
    if (const json* v = obj.find("rollout_grid")) exp.rollout_grid = v->get<std::vector<int>>();
    exp.repetitions = obj.get_or<int>("repetitions", exp.repetitions);
    exp.r_credibility = obj.get_or<double>("r_credibility", exp.r_credibility);
    exp.n_eval_systems = obj.get_or<long>("n_eval_systems", exp.n_eval_systems);
    exp.horizon = obj.get_or<long>("horizon", exp.horizon);
    exp.n_true_reps = obj.get_or<long>("n_true_reps", exp.n_true_reps);
    exp.samples_per_rollout = obj.get_or<int>("samples_per_rollout", exp.samples_per_rollout);
    exp.input_std = obj.get_or<double>("input_std", exp.input_std);
    exp.init_std = obj.get_or<double>("init_std", exp.init_std);
    exp.divergence_threshold = obj.get_or<double>("divergence_threshold", exp.divergence_threshold);
    exp.record_runtimes = obj.get_or<bool>("record_runtimes", exp.record_runtimes);
    obj.finish();
}

}  // namespace

bench::ExperimentConfig RunConfig::resolved_experiment() const {
    bench::ExperimentConfig exp = experiment;
    exp.profile = profile;
    exp.synthesis = synthesis;
    exp.seed = seed;
    exp.gp_signal_variance = gp.signal_variance;
    exp.gp_lengthscales = gp.lengthscales;
    exp.gp_noise_variances = gp.noise_variances;
    exp.gp_regress_deltas = gp.regress_deltas;
    return exp;
}

RunConfig run_config_from_json(const json& j) {
    StrictObject obj(j, "config");
    RunConfig cfg;
    cfg.seed = obj.get_or<std::uint64_t>("seed", 0);
    cfg.out_dir = obj.get_or<std::string>("out_dir", cfg.out_dir);
    if (const json* v = obj.find("law")) cfg.law_path = v->get<std::string>();
    if (const json* v = obj.find("dataset")) cfg.dataset_path = v->get<std::string>();
    if (const json* v = obj.find("operating_point"))
        cfg.operating_point = vector_from_json(*v, "config.operating_point");
    if (const json* v = obj.find("weights")) cfg.weights = weights_from_json(*v);
    if (const json* v = obj.find("profile")) cfg.profile = profile_from_json(*v);
    if (const json* v = obj.find("gp")) cfg.gp = gp_from_json(*v);
    if (const json* v = obj.find("synthesis")) {
        StrictObject syn(*v, "synthesis");
        cfg.synthesis.stop.rel_tol = syn.get_or<double>("rel_tol", cfg.synthesis.stop.rel_tol);
        cfg.synthesis.stop.max_iter = syn.get_or<int>("max_iter", cfg.synthesis.stop.max_iter);
        cfg.synthesis.max_restarts = syn.get_or<int>("max_restarts", cfg.synthesis.max_restarts);
        syn.finish();
    }
    if (const json* v = obj.find("solver")) cfg.synthesis.solver = solver_from_json(*v);
    if (const json* v = obj.find("experiment")) experiment_from_json(*v, cfg.experiment);
    obj.finish();
    cfg.config_hash = json_content_hash(j);
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    json j;
    try {
        j = json::parse(read_text(path));
    } catch (const json::parse_error& e) {
        throw DomainError("config '" + path.string() + "': " + e.what());
    }
    return run_config_from_json(j);
}

}  // namespace prc::io
