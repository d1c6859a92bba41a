#include "calibkit/strategies.hpp"

#include <fstream>
#include <sstream>

#include "calibkit/csv.hpp"
#include "calibkit/errors.hpp"
#include "calibkit/hash.hpp"
#include "calibkit/parallel.hpp"
#include "calibkit/random.hpp"

namespace calibkit {

namespace {

struct StrategyName {
    StrategyId id;
    const char* name;
};

constexpr StrategyName kNames[] = {
    {StrategyId::ForwComp, "ForwComp"}, {StrategyId::ForwSpli, "ForwSpli"}, {StrategyId::ForwSpliII, "ForwSpliII"},
    {StrategyId::ForwSpliIII, "ForwSpliIII"}, {StrategyId::ErrorF1, "ErrorF1"}, {StrategyId::ErrorF2, "ErrorF2"},
    {StrategyId::InvExp, "InvExp"}, {StrategyId::InvExpII, "InvExpII"}, {StrategyId::InvPCA, "InvPCA"},
};

std::vector<int> stepped(int first, int last, int step) {
    std::vector<int> out;
    for (int k = first; k <= last; k += step) out.push_back(k);
    return out;
}

// Alternating +30/+20 pattern, enumerated rather than generated.
const std::vector<int> kForwSpliIIIComponents = {
    100, 130, 150, 170, 200, 230, 250, 270, 300, 330, 350,  370,  400,  430,  450,  470,  500,  530,  550,  570,  600, 630,
    650, 670, 700, 730, 750, 770, 800, 830, 850, 870, 900,  930,  950,  970,  1000, 1030, 1050, 1070, 1100, 1130, 1150};

constexpr int kForwCompStride = 10;
constexpr int kPcaInputs = 9;

void require_shape(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const char* what) {
    if (a.size() != b.size())
        throw ShapeError(std::string(what) + ": response has " + std::to_string(a.size()) + " values, data has " +
                         std::to_string(b.size()));
}

}  // namespace

std::string to_string(StrategyId id) {
    for (const auto& n : kNames)
        if (n.id == id) return n.name;
    return "?";
}

const std::vector<StrategyId>& all_strategies() {
    static const std::vector<StrategyId> ids = [] {
        std::vector<StrategyId> v;
        for (const auto& n : kNames) v.push_back(n.id);
        return v;
    }();
    return ids;
}

std::string valid_strategy_list() {
    std::string s;
    for (const auto& n : kNames) s += (s.empty() ? "" : ", ") + std::string(n.name);
    return s;
}

StrategyId strategy_from_string(const std::string& name) {
    for (const auto& n : kNames)
        if (name == n.name) return n.id;
    throw ConfigError("unknown strategy '" + name + "'; valid ids: " + valid_strategy_list());
}

int StrategyConfig::net_count() const {
    switch (family) {
    case StrategyFamily::Inverse: return 4;
    case StrategyFamily::Error: return 1;
    case StrategyFamily::Forward: return id == StrategyId::ForwComp ? 1 : static_cast<int>(components.size());
    }
    return 0;
}

std::vector<std::string> StrategyConfig::output_ids() const {
    std::vector<std::string> ids;
    switch (family) {
    case StrategyFamily::Inverse:
        for (int j = 1; j <= 4; ++j) ids.push_back("p" + std::to_string(j));
        break;
    case StrategyFamily::Error: ids.push_back("F" + std::to_string(error_function)); break;
    case StrategyFamily::Forward:
        if (id == StrategyId::ForwComp)
            ids.push_back("alpha_t");
        else
            for (int k : components) ids.push_back("alpha_" + std::to_string(k));
        break;
    }
    return ids;
}

StrategyConfig strategy_config(StrategyId id, int n_time) {
    StrategyConfig c;
    c.id = id;
    switch (id) {
    case StrategyId::ForwComp:
        c.subsample_m = kForwCompStride;
        c.components = stepped(1, n_time, kForwCompStride);
        break;
    case StrategyId::ForwSpli: c.components = stepped(300, 1100, 100); break;
    case StrategyId::ForwSpliII: c.components = stepped(100, 1150, 50); break;
    case StrategyId::ForwSpliIII: c.components = kForwSpliIIIComponents; break;
    case StrategyId::ErrorF1:
        c.family = StrategyFamily::Error;
        c.error_function = 1;
        break;
    case StrategyId::ErrorF2:
        c.family = StrategyFamily::Error;
        c.error_function = 2;
        break;
    case StrategyId::InvExp:
        c.family = StrategyFamily::Inverse;
        c.components = stepped(300, 1100, 100);
        break;
    case StrategyId::InvExpII:
        c.family = StrategyFamily::Inverse;
        c.components = stepped(200, 1100, 100);
        break;
    case StrategyId::InvPCA:
        c.family = StrategyFamily::Inverse;
        c.pc_count = kPcaInputs;
        break;
    }
    for (int k : c.components)
        if (k < 1 || k > n_time)
            throw ConfigError(to_string(id) + " uses component " + std::to_string(k) + " but the grid has " +
                              std::to_string(n_time) + " points");
    return c;
}

double error_f1(const Eigen::VectorXd& response, const Eigen::VectorXd& data) {
    require_shape(response, data, "error_f1");
    return (response - data).squaredNorm();
}

double error_f2(const Eigen::VectorXd& response, const Eigen::VectorXd& data) {
    require_shape(response, data, "error_f2");
    return (response - data).cwiseAbs().sum();
}

double error_function(int which, const Eigen::VectorXd& response, const Eigen::VectorXd& data) {
    if (which == 1) return error_f1(response, data);
    if (which == 2) return error_f2(response, data);
    throw ConfigError("error function must be 1 or 2, got " + std::to_string(which));
}

Eigen::VectorXd inverse_features(const StrategyConfig& strategy, const Eigen::VectorXd& curve, const PcaModel* pca) {
    if (strategy.family != StrategyFamily::Inverse) throw ConfigError(to_string(strategy.id) + " is not inverse");
    if (strategy.id == StrategyId::InvPCA) {
        if (!pca) throw ConfigError("InvPCA needs a fitted PCA model");
        return pca_project(*pca, curve, strategy.pc_count);
    }
    Eigen::VectorXd f(static_cast<Eigen::Index>(strategy.components.size()));
    for (std::size_t i = 0; i < strategy.components.size(); ++i) {
        const int k = strategy.components[i];
        if (k > curve.size()) throw ShapeError("curve has no component " + std::to_string(k));
        f[static_cast<Eigen::Index>(i)] = curve[k - 1];
    }
    return f;
}

std::vector<NetDataset> build_dataset(const StrategyConfig& s, const Eigen::MatrixXd& design,
                                      const Eigen::MatrixXd& bundle, const TimeGrid& grid,
                                      const StrategyExtras& extras) {
    if (design.rows() != bundle.rows())
        throw ShapeError("design has " + std::to_string(design.rows()) + " rows, bundle has " +
                         std::to_string(bundle.rows()));
    if (design.cols() != 4) throw ShapeError("design must have 4 parameter columns");
    if (bundle.cols() != grid.size()) throw ShapeError("bundle columns differ from the time grid size");
    for (int k : s.components)
        if (k > grid.size()) throw ConfigError("component " + std::to_string(k) + " is beyond the grid");
    const Eigen::Index n = design.rows();
    const auto ids = s.output_ids();
    std::vector<NetDataset> out;

    switch (s.family) {
    case StrategyFamily::Forward:
        if (s.id == StrategyId::ForwComp) {
            const auto m = static_cast<Eigen::Index>(s.components.size());
            NetDataset d{ids[0], Eigen::MatrixXd(n * m, 5), Eigen::MatrixXd(n * m, 1)};
            for (Eigen::Index i = 0; i < n; ++i)
                for (Eigen::Index c = 0; c < m; ++c) {
                    const int k = s.components[static_cast<std::size_t>(c)];
                    const Eigen::Index row = i * m + c;
                    d.inputs.row(row).head(4) = design.row(i);
                    d.inputs(row, 4) = std::log10(grid.at_component(k));
                    d.targets(row, 0) = bundle(i, k - 1);
                }
            out.push_back(std::move(d));
        } else {
            for (std::size_t c = 0; c < s.components.size(); ++c)
                out.push_back({ids[c], design, bundle.col(s.components[c] - 1)});
        }
        break;
    case StrategyFamily::Error: {
        if (!extras.observed) throw ConfigError(to_string(s.id) + " needs an observed curve");
        if (extras.observed->size() != bundle.cols())
            throw ShapeError("observed curve must be resampled onto the full time grid");
        NetDataset d{ids[0], design, Eigen::MatrixXd(n, 1)};
        for (Eigen::Index i = 0; i < n; ++i)
            d.targets(i, 0) = error_function(s.error_function, bundle.row(i).transpose(), *extras.observed);
        out.push_back(std::move(d));
        break;
    }
    case StrategyFamily::Inverse: {
        if (s.id == StrategyId::InvPCA && !extras.pca) throw ConfigError("InvPCA needs a fitted PCA model");
        if (s.id == StrategyId::InvPCA && extras.pca->components() < s.pc_count)
            throw ConfigError("PCA model has only " + std::to_string(extras.pca->components()) + " components, " +
                              std::to_string(s.pc_count) + " required");
        Eigen::MatrixXd features;
        for (Eigen::Index i = 0; i < n; ++i) {
            const Eigen::VectorXd f = inverse_features(s, bundle.row(i).transpose(), extras.pca);
            if (i == 0) features.resize(n, f.size());
            features.row(i) = f.transpose();
        }
        for (int j = 0; j < 4; ++j) out.push_back({ids[static_cast<std::size_t>(j)], features, design.col(j)});
        break;
    }
    }
    return out;
}

std::string matrix_hash(const Eigen::MatrixXd& m) {
    Fnv1a h;
    const std::int64_t shape[2] = {m.rows(), m.cols()};
    h.update(shape, sizeof shape);
    // Column-major storage order is fixed by the type, so the hash is stable.
    h.update(m.data(), static_cast<std::size_t>(m.size()) * sizeof(double));
    return h.hex();
}

SurrogateBank train_bank(const StrategyConfig& strategy, const Eigen::MatrixXd& design, const Eigen::MatrixXd& bundle,
                         const TimeGrid& grid, const BankTrainOptions& options, const StrategyExtras& extras) {
    options.train.validate();
    SurrogateBank bank;
    bank.strategy = strategy;
    bank.grid_times = grid.times();
    bank.train_config = options.train;
    bank.doe_seed = options.doe_seed;
    bank.design_hash = matrix_hash(design);
    bank.bundle_hash = matrix_hash(bundle);

    std::optional<PcaModel> local_pca;
    StrategyExtras ex = extras;
    if (strategy.id == StrategyId::InvPCA && !ex.pca) {
        local_pca = pca_fit(bundle);
        ex.pca = &*local_pca;
    }
    const auto datasets = build_dataset(strategy, design, bundle, grid, ex);
    if (ex.pca && strategy.id == StrategyId::InvPCA) bank.pca = *ex.pca;
    if (strategy.family == StrategyFamily::Error) bank.observed = *ex.observed;
    bank.param_min = design.colwise().minCoeff().transpose();
    bank.param_max = design.colwise().maxCoeff().transpose();
    bank.response_min = bundle.minCoeff();
    bank.response_max = bundle.maxCoeff();

    const std::size_t count = datasets.size();
    bank.nets.resize(count);
    bank.reports.resize(count);
    // Parallelize across nets when there are several, across folds otherwise.
    const int outer = count > 1 ? options.jobs : 1;
    const int inner = count > 1 ? 1 : options.jobs;
    parallel_for(count, outer, [&](std::size_t i) {
        TrainConfig cfg = options.train;
        cfg.seed = derive_seed(options.train.seed, 0xBA4C, i);
        cfg.jobs = inner;
        const auto& d = datasets[i];
        try {
            TrainReport report = cross_validate(d.inputs, d.targets, cfg);
            report.final_net.provenance.strategy = to_string(strategy.id);
            report.final_net.provenance.output_id = d.output_id;
            bank.nets[i] = report.final_net;
            bank.reports[i] = std::move(report);
        } catch (const TrainingDivergence& e) {
            throw TrainingDivergence(to_string(strategy.id) + "/" + d.output_id + ": " + e.what(), e.iteration());
        } catch (const ConfigError& e) {
            throw ConfigError(to_string(strategy.id) + "/" + d.output_id + ": " + e.what());
        } catch (const NumericalError& e) {
            throw NumericalError(to_string(strategy.id) + "/" + d.output_id + ": " + e.what(), e.residual());
        }
    });
    return bank;
}

std::vector<double> evaluate_bank(SurrogateBank& bank, const Eigen::MatrixXd& design, const Eigen::MatrixXd& bundle) {
    StrategyExtras ex;
    if (bank.pca) ex.pca = &*bank.pca;
    if (bank.strategy.family == StrategyFamily::Error) ex.observed = &bank.observed;
    const auto datasets = build_dataset(bank.strategy, design, bundle, bank.grid(), ex);
    std::vector<double> out;
    for (std::size_t i = 0; i < datasets.size(); ++i) {
        NeuralNet& net = bank.nets[i];
        const double mrp = evaluate_mrp(net, datasets[i].inputs, datasets[i].targets, net.output_scaler.data_min[0],
                                        net.output_scaler.data_max[0]);
        net.provenance.test_mrp = mrp;
        if (i < bank.reports.size()) {
            bank.reports[i].test_mrp = mrp;
            bank.reports[i].final_net.provenance.test_mrp = mrp;
        }
        out.push_back(mrp);
    }
    return out;
}

const std::vector<int>& bank_components(const SurrogateBank& bank) {
    if (bank.strategy.family != StrategyFamily::Forward)
        throw ConfigError(to_string(bank.strategy.id) + " is not a forward strategy");
    return bank.strategy.components;
}

Eigen::MatrixXd predict_forward(const SurrogateBank& bank, const Eigen::MatrixXd& points) {
    const auto& comps = bank_components(bank);
    const auto m = static_cast<Eigen::Index>(comps.size());
    Eigen::MatrixXd out(points.rows(), m);
    if (bank.strategy.id == StrategyId::ForwComp) {
        const TimeGrid grid = bank.grid();
        Eigen::MatrixXd in(m, 5);
        for (Eigen::Index c = 0; c < m; ++c) in(c, 4) = std::log10(grid.at_component(comps[static_cast<std::size_t>(c)]));
        for (Eigen::Index i = 0; i < points.rows(); ++i) {
            in.leftCols(4).rowwise() = points.row(i);
            out.row(i) = forward_batch(bank.nets[0], in).col(0).transpose();
        }
    } else {
        for (Eigen::Index c = 0; c < m; ++c) out.col(c) = forward_batch(bank.nets[static_cast<std::size_t>(c)], points).col(0);
    }
    return out;
}

Eigen::VectorXd predict_error(const SurrogateBank& bank, const Eigen::MatrixXd& points) {
    if (bank.strategy.family != StrategyFamily::Error)
        throw ConfigError(to_string(bank.strategy.id) + " is not an error strategy");
    return forward_batch(bank.nets[0], points).col(0);
}

StandardizedParams predict_parameters(const SurrogateBank& bank, const Eigen::VectorXd& curve) {
    if (bank.strategy.family != StrategyFamily::Inverse)
        throw ConfigError(to_string(bank.strategy.id) + " is not an inverse strategy");
    if (curve.size() != bank.grid_times.size())
        throw ShapeError("curve must have one value per grid point (" + std::to_string(bank.grid_times.size()) + ")");
    const Eigen::VectorXd f = inverse_features(bank.strategy, curve, bank.pca ? &*bank.pca : nullptr);
    StandardizedParams p;
    for (int j = 0; j < 4; ++j) p.p[j] = forward(bank.nets[static_cast<std::size_t>(j)], f)[0];
    return p;
}

// --- persistence --------------------------------------------------------------

namespace {

std::vector<double> to_vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Eigen::VectorXd from_vec(const nlohmann::json& j, const std::string& path) {
    std::vector<double> v;
    try {
        v = j.get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    return Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << text;
    if (!out) throw DataError("failed writing " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

nlohmann::json parse_json_file(const std::filesystem::path& path) {
    try {
        return nlohmann::json::parse(read_text(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path.string() + ": malformed JSON: " + e.what());
    }
}

}  // namespace

void save_bank(const SurrogateBank& bank, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const std::string sid = to_string(bank.strategy.id);
    const auto ids = bank.strategy.output_ids();
    if (ids.size() != bank.nets.size()) throw ShapeError("bank net count differs from the strategy's");

    nlohmann::json nets = nlohmann::json::array();
    for (std::size_t i = 0; i < bank.nets.size(); ++i) {
        const std::string file = sid + "_" + ids[i] + ".json";
        const std::string text = serialize(bank.nets[i]);
        write_text(dir / file, text + "\n");
        nlohmann::json entry = {{"output_id", ids[i]}, {"file", file}, {"weights_hash", matrix_hash(bank.nets[i].weights)}};
        if (i < bank.reports.size()) entry["training"] = to_json(bank.reports[i]);
        nets.push_back(entry);
    }
    nlohmann::json doc = {{"format", "calibkit-bank"},
                          {"version", kBankFormatVersion},
                          {"strategy", sid},
                          {"nets", nets},
                          {"grid_times", to_vec(bank.grid_times)},
                          {"param_min", to_vec(bank.param_min)},
                          {"param_max", to_vec(bank.param_max)},
                          {"response_min", bank.response_min},
                          {"response_max", bank.response_max},
                          {"provenance",
                           {{"doe_seed", bank.doe_seed},
                            {"design_hash", bank.design_hash},
                            {"bundle_hash", bank.bundle_hash},
                            {"train_config", to_json(bank.train_config)}}}};
    if (bank.strategy.family == StrategyFamily::Error) doc["observed"] = to_vec(bank.observed);
    if (bank.pca) {
        const PcaModel& pca = *bank.pca;
        nlohmann::json pj = {{"mean_curve", to_vec(pca.mean_curve)},
                             {"variances", to_vec(pca.variances)},
                             {"components", pca.components()},
                             {"warning", pca.warning},
                             {"basis_file", "pca_basis.csv"}};
        write_text(dir / "pca.json", pj.dump(2) + "\n");
        std::vector<std::string> header;
        for (int c = 0; c < pca.components(); ++c) header.push_back("pc" + std::to_string(c + 1));
        csv::write(dir / "pca_basis.csv", header, pca.basis);
        doc["pca"] = "pca.json";
    }
    write_text(dir / "bank.json", doc.dump(2) + "\n");
}

SurrogateBank load_bank(const std::filesystem::path& dir) {
    const auto doc = parse_json_file(dir / "bank.json");
    if (!doc.is_object() || doc.value("format", "") != "calibkit-bank")
        throw ParseError((dir / "bank.json").string() + ": not a calibkit bank manifest");
    const int version = doc.value("version", -1);
    if (version != kBankFormatVersion)
        throw ParseError((dir / "bank.json").string() + ": unsupported bank version " + std::to_string(version));

    SurrogateBank bank;
    bank.grid_times = from_vec(doc.at("grid_times"), "$.grid_times");
    bank.strategy = strategy_config(strategy_from_string(doc.at("strategy").get<std::string>()),
                                    static_cast<int>(bank.grid_times.size()));
    bank.param_min = from_vec(doc.at("param_min"), "$.param_min");
    bank.param_max = from_vec(doc.at("param_max"), "$.param_max");
    bank.response_min = doc.at("response_min").get<double>();
    bank.response_max = doc.at("response_max").get<double>();
    const auto& prov = doc.at("provenance");
    bank.doe_seed = prov.value("doe_seed", std::uint64_t{0});
    bank.design_hash = prov.value("design_hash", "");
    bank.bundle_hash = prov.value("bundle_hash", "");
    if (prov.contains("train_config")) {
        const auto& tc = prov["train_config"];
        TrainConfig c;
        c.v_folds = tc.value("v_folds", c.v_folds);
        c.ratio_window = tc.value("ratio_window", c.ratio_window);
        c.max_iters = tc.value("max_iters", c.max_iters);
        c.pe_ratio_max = tc.value("pe_ratio_max", c.pe_ratio_max);
        c.h_min = tc.value("h_min", c.h_min);
        c.cve_ratio_max = tc.value("cve_ratio_max", c.cve_ratio_max);
        c.max_exceed = tc.value("max_exceed", c.max_exceed);
        c.h_max = tc.value("h_max", c.h_max);
        c.seed = tc.value("seed", c.seed);
        bank.train_config = c;
    }
    if (bank.strategy.family == StrategyFamily::Error) bank.observed = from_vec(doc.at("observed"), "$.observed");

    const auto ids = bank.strategy.output_ids();
    const auto& nets = doc.at("nets");
    if (!nets.is_array() || nets.size() != ids.size())
        throw ParseError("bank.json: expected " + std::to_string(ids.size()) + " nets for " +
                         to_string(bank.strategy.id));
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const std::string file = nets[i].at("file").get<std::string>();
        NeuralNet net;
        try {
            net = deserialize(read_text(dir / file));
        } catch (const ParseError& e) {
            throw ParseError(file + ": " + e.what());
        }
        if (nets[i].contains("weights_hash") && nets[i]["weights_hash"].get<std::string>() != matrix_hash(net.weights))
            throw ParseError(file + ": weights do not match the hash recorded in bank.json");
        bank.nets.push_back(std::move(net));
    }

    if (bank.strategy.id == StrategyId::InvPCA) {
        const auto pj = parse_json_file(dir / "pca.json");
        PcaModel pca;
        pca.mean_curve = from_vec(pj.at("mean_curve"), "pca.json:$.mean_curve");
        pca.variances = from_vec(pj.at("variances"), "pca.json:$.variances");
        pca.warning = pj.value("warning", "");
        pca.basis = csv::read(dir / pj.value("basis_file", "pca_basis.csv")).values;
        if (pca.basis.rows() != pca.mean_curve.size() || pca.basis.cols() != pca.variances.size())
            throw ParseError("pca_basis.csv: shape does not match pca.json");
        bank.pca = std::move(pca);
    }
    return bank;
}

}  // namespace calibkit
