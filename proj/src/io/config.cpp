#include "rlstat/io/config.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <set>

#include "rlstat/error.hpp"

namespace rlstat::io {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw UsageError("cli_io", "config " + where + ": " + what);
}

void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) fail(where, "expected an object");
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
      fail(where, "unknown key '" + key + "'");
  }
}

template <class T>
T get(const json& obj, const char* key, const std::string& where, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    fail(where + "." + key, "has the wrong type");
  }
}

template <class T>
T require(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) fail(where, "missing required key '" + std::string(key) + "'");
  return get<T>(obj, key, where, T{});
}

std::vector<std::string> strings(const json& obj, const char* key, const std::string& where) {
  return get<std::vector<std::string>>(obj, key, where, {});
}

std::size_t count(const json& obj, const char* key, const std::string& where, std::size_t fallback) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0) fail(where + "." + key, "must be a nonnegative integer");
  return v.get<std::size_t>();
}

std::uint64_t seed(const json& obj, const char* key, const std::string& where, std::uint64_t fallback) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0))
    fail(where + "." + key, "must be a nonnegative integer");
  return v.get<std::uint64_t>();
}

WeightScheme parse_scheme(const json& j, const std::string& where) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "none") return AllOnes{};
    if (s == "residual_trim") return ResidualTrim{};
    fail(where, "unknown scheme '" + s + "'");
  }
  const auto type = require<std::string>(j, "type", where);
  WeightScheme out;
  if (type == "none") {
    check_keys(j, where, {"type"});
    out = AllOnes{};
  } else if (type == "quantile_trim") {
    check_keys(j, where, {"type", "columns", "lower", "upper"});
    QuantileTrim q;
    q.columns = strings(j, "columns", where);
    q.lower = get<double>(j, "lower", where, q.lower);
    q.upper = get<double>(j, "upper", where, q.upper);
    out = q;
  } else if (type == "residual_trim") {
    check_keys(j, where, {"type", "c"});
    out = ResidualTrim{get<double>(j, "c", where, 1.96)};
  } else if (type == "winsorize") {
    check_keys(j, where, {"type", "column", "lower", "upper"});
    Winsorize w;
    w.column = get<std::string>(j, "column", where, "");
    w.lower = get<double>(j, "lower", where, w.lower);
    w.upper = get<double>(j, "upper", where, w.upper);
    out = w;
  } else if (type == "custom") {
    check_keys(j, where, {"type", "column"});
    out = CustomWeights{require<std::string>(j, "column", where), {}};
  } else {
    fail(where, "unknown scheme type '" + type + "'");
  }
  try {
    validate(out);
  } catch (const UsageError& e) {
    fail(where, e.what());
  }
  return out;
}

Transform parse_transform(const json& j, const std::string& where) {
  if (j.is_string()) {
    if (j.get<std::string>() == "identity") return Transform::identity();
    fail(where, "unknown transform '" + j.get<std::string>() + "'");
  }
  if (j.is_object() && j.contains("power")) {
    check_keys(j, where, {"power"});
    return Transform::power(require<double>(j, "power", where));
  }
  if (j.is_object() && j.contains("table")) {
    check_keys(j, where, {"table"});
    const auto& t = j.at("table");
    check_keys(t, where + ".table", {"x", "m", "dm"});
    try {
      return Transform::table(require<std::vector<double>>(t, "x", where + ".table"),
                              require<std::vector<double>>(t, "m", where + ".table"),
                              require<std::vector<double>>(t, "dm", where + ".table"));
    } catch (const UsageError& e) {
      fail(where, e.what());
    }
  }
  fail(where, "transform must be \"identity\", {\"power\": p} or {\"table\": {...}}");
}

Distribution parse_distribution(const json& j, const std::string& where) {
  check_keys(j, where, {"law", "a", "b"});
  Distribution d;
  try {
    d.law = parse_law(require<std::string>(j, "law", where));
  } catch (const UsageError& e) {
    fail(where, e.what());
  }
  if (d.law == Law::kUniform) {
    d.a = 0.0;
    d.b = 1.0;
  } else if (d.law == Law::kStudentT) {
    d.a = 5.0;
  } else if (d.law == Law::kPointMass) {
    d.b = 0.0;
  }
  d.a = get<double>(j, "a", where, d.a);
  d.b = get<double>(j, "b", where, d.b);
  return d;
}

RegressionDGP parse_regression_dgp(const json& j, const std::string& where) {
  RegressionDGP m;
  m.beta0 = get<double>(j, "beta0", where, m.beta0);
  m.beta1 = get<double>(j, "beta1", where, m.beta1);
  if (j.contains("error")) m.error = parse_distribution(j.at("error"), where + ".error");
  m.instrument_strength = get<double>(j, "instrument_strength", where, m.instrument_strength);
  m.endogeneity = get<double>(j, "endogeneity", where, m.endogeneity);
  return m;
}

McConfig parse_mc(const json& j) {
  const std::string where = "mc";
  check_keys(j, where, {"dgp", "reps", "seed", "study"});
  McConfig mc;
  if (!j.contains("dgp")) fail(where, "missing required key 'dgp'");
  const auto& d = j.at("dgp");
  const std::string dw = "mc.dgp";
  const auto kind = require<std::string>(d, "kind", dw);
  mc.dgp.n = count(d, "n", dw, mc.dgp.n);
  if (kind == "univariate") {
    check_keys(d, dw, {"kind", "n", "columns", "trimmed"});
    UnivariateDGP u;
    if (d.contains("columns")) {
      u.columns.clear();
      std::size_t k = 0;
      for (const auto& c : d.at("columns")) u.columns.push_back(parse_distribution(c, dw + ".columns[" + std::to_string(k++) + "]"));
    }
    u.trimmed = get<std::vector<bool>>(d, "trimmed", dw, {});
    mc.dgp.kind = u;
  } else if (kind == "regression") {
    check_keys(d, dw, {"kind", "n", "beta0", "beta1", "error", "instrument_strength", "endogeneity"});
    mc.dgp.kind = parse_regression_dgp(d, dw);
  } else if (kind == "panel") {
    check_keys(d, dw, {"kind", "n", "beta0", "beta1", "error", "instrument_strength", "endogeneity",
                       "t_min", "t_max", "effect_sd"});
    PanelDGP p;
    p.model = parse_regression_dgp(d, dw);
    p.t_min = count(d, "t_min", dw, p.t_min);
    p.t_max = count(d, "t_max", dw, std::max(p.t_min, p.t_max));
    p.effect_sd = get<double>(d, "effect_sd", dw, p.effect_sd);
    mc.dgp.kind = p;
  } else {
    fail(dw, "unknown kind '" + kind + "' (univariate, regression, panel)");
  }
  try {
    validate(mc.dgp);
  } catch (const UsageError& e) {
    fail(dw, e.what());
  }
  mc.reps = count(j, "reps", where, mc.reps);
  if (mc.reps < 2) fail(where, "reps must be at least 2");
  mc.seed = seed(j, "seed", where, mc.seed);
  mc.study = get<std::string>(j, "study", where, mc.study);
  if (mc.study != "covariance" && mc.study != "size") fail(where, "study must be 'covariance' or 'size'");
  return mc;
}

bool valid_name(const std::string& s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
  });
}

ComparisonSpec parse_comparison(const json& j, std::size_t index, const std::string& cluster) {
  std::string where = "comparisons[" + std::to_string(index) + "]";
  check_keys(j, where,
             {"name", "kind", "outcome", "regressors", "instruments", "endogenous", "fixed_effects",
              "intercept", "normalization", "statistics", "baseline", "adjusted", "coefficients", "derived"});
  ComparisonSpec c;
  c.name = require<std::string>(j, "name", where);
  if (!valid_name(c.name)) fail(where, "name must be non-empty and use only letters, digits, '_', '-', '.'");
  where = "comparison '" + c.name + "'";
  const auto kind = get<std::string>(j, "kind", where, "ols");
  if (kind == "ols")
    c.kind = ComparisonKind::kOls;
  else if (kind == "iv")
    c.kind = ComparisonKind::kIv;
  else if (kind == "lstat")
    c.kind = ComparisonKind::kLStat;
  else
    fail(where, "kind must be ols, iv or lstat");

  c.baseline = j.contains("baseline") ? parse_scheme(j.at("baseline"), where + ".baseline") : WeightScheme{AllOnes{}};
  c.adjusted = j.contains("adjusted") ? parse_scheme(j.at("adjusted"), where + ".adjusted")
                                      : (c.kind == ComparisonKind::kLStat ? WeightScheme{QuantileTrim{}} : WeightScheme{ResidualTrim{}});

  if (c.kind == ComparisonKind::kLStat) {
    for (const char* k : {"outcome", "regressors", "instruments", "endogenous", "fixed_effects", "intercept",
                          "normalization", "coefficients", "derived"})
      if (j.contains(k)) fail(where, std::string("key '") + k + "' does not apply to lstat comparisons");
    if (!j.contains("statistics") || !j.at("statistics").is_array() || j.at("statistics").empty())
      fail(where, "lstat comparisons need a non-empty 'statistics' array");
    std::size_t k = 0;
    for (const auto& s : j.at("statistics")) {
      const std::string sw = where + ".statistics[" + std::to_string(k++) + "]";
      check_keys(s, sw, {"name", "column", "transform"});
      LStatSpec spec;
      spec.column = require<std::string>(s, "column", sw);
      spec.name = get<std::string>(s, "name", sw, spec.column);
      if (s.contains("transform")) spec.m = parse_transform(s.at("transform"), sw + ".transform");
      c.statistics.push_back(std::move(spec));
    }
    for (const auto* scheme : {&c.baseline, &c.adjusted})
      if (std::holds_alternative<ResidualTrim>(*scheme))
        fail(where, "residual trimming needs a regression model");
  } else {
    if (j.contains("statistics")) fail(where, "'statistics' applies only to lstat comparisons");
    c.model.outcome = require<std::string>(j, "outcome", where);
    c.model.regressors = strings(j, "regressors", where);
    c.model.instruments = strings(j, "instruments", where);
    c.model.endogenous = strings(j, "endogenous", where);
    c.model.fixed_effects = strings(j, "fixed_effects", where);
    for (auto& fe : c.model.fixed_effects)
      if (fe == cluster) fe = kClusterFactor;
    c.model.intercept = get<bool>(j, "intercept", where, true);
    const auto norm = get<std::string>(j, "normalization", where, "cluster");
    if (norm == "cluster")
      c.model.normalization = Normalization::kClusterEqual;
    else if (norm == "pooled")
      c.model.normalization = Normalization::kPooled;
    else
      fail(where, "normalization must be 'cluster' or 'pooled'");
    if (c.kind == ComparisonKind::kIv && c.model.instruments.empty()) fail(where, "iv comparisons need instruments");
    if (c.kind == ComparisonKind::kOls && (!c.model.instruments.empty() || !c.model.endogenous.empty()))
      fail(where, "ols comparisons take no instruments");
    if (c.model.regressors.empty() && !c.model.intercept) fail(where, "model has no regressors");
    const auto endog = c.model.endogenous_regressors();
    if (c.kind == ComparisonKind::kIv) {
      for (const auto& e : endog)
        if (std::find(c.model.regressors.begin(), c.model.regressors.end(), e) == c.model.regressors.end())
          fail(where, "endogenous variable '" + e + "' is not a regressor");
      if (c.model.instruments.size() < endog.size()) fail(where, "fewer instruments than endogenous regressors");
    }
    for (const auto* scheme : {&c.baseline, &c.adjusted})
      if (std::holds_alternative<Winsorize>(*scheme))
        fail(where, "winsorizing applies to lstat comparisons only");
    c.coefficients = strings(j, "coefficients", where);
    if (c.coefficients.empty()) c.coefficients = c.model.regressors;
    if (c.coefficients.empty()) c.coefficients = {"(intercept)"};
    for (const auto& name : c.coefficients) {
      const bool known = name == "(intercept)" ? c.model.intercept
                                               : std::find(c.model.regressors.begin(), c.model.regressors.end(),
                                                           name) != c.model.regressors.end();
      if (!known) fail(where, "coefficient '" + name + "' is not in the model");
    }
    if (j.contains("derived")) {
      const auto& d = j.at("derived");
      check_keys(d, where + ".derived", {"beta0", "lags"});
      DerivedSpec ds;
      ds.beta0 = require<std::string>(d, "beta0", where + ".derived");
      const auto lags = require<std::vector<std::string>>(d, "lags", where + ".derived");
      if (lags.size() != 4) fail(where + ".derived", "lags must name exactly four coefficients");
      std::copy(lags.begin(), lags.end(), ds.lags.begin());
      for (const auto* name : {&ds.beta0, &ds.lags[0], &ds.lags[1], &ds.lags[2], &ds.lags[3]})
        if (std::find(c.model.regressors.begin(), c.model.regressors.end(), *name) == c.model.regressors.end())
          fail(where + ".derived", "'" + *name + "' is not a regressor");
      c.derived = ds;
    }
  }
  return c;
}

}  // namespace

const char* to_string(ComparisonKind kind) {
  switch (kind) {
    case ComparisonKind::kOls:
      return "ols";
    case ComparisonKind::kIv:
      return "iv";
    case ComparisonKind::kLStat:
      return "lstat";
  }
  return "?";
}

AnalysisConfig parse_config(const json& doc, const std::string& base_dir) {
  check_keys(doc, "document",
             {"input", "cluster", "output", "lags", "bootstrap", "test", "comparisons", "mc", "timestamps"});
  AnalysisConfig cfg;
  auto resolve = [&](const std::string& p) {
    if (p.empty() || base_dir.empty() || std::filesystem::path(p).is_absolute()) return p;
    return (std::filesystem::path(base_dir) / p).lexically_normal().string();
  };
  cfg.input = resolve(get<std::string>(doc, "input", "document", ""));
  cfg.cluster = get<std::string>(doc, "cluster", "document", "");
  cfg.output = resolve(get<std::string>(doc, "output", "document", cfg.output));
  cfg.timestamps = get<bool>(doc, "timestamps", "document", false);

  if (doc.contains("lags")) {
    std::size_t k = 0;
    for (const auto& l : doc.at("lags")) {
      const std::string where = "lags[" + std::to_string(k++) + "]";
      check_keys(l, where, {"column", "count"});
      LagSpec ls{require<std::string>(l, "column", where), count(l, "count", where, 1)};
      if (ls.count == 0) fail(where, "count must be positive");
      cfg.lags.push_back(ls);
    }
  }

  if (doc.contains("bootstrap")) {
    const auto& b = doc.at("bootstrap");
    const std::string where = "bootstrap";
    check_keys(b, where, {"iterations", "seed", "unit", "engine", "multiplier_law", "threads", "max_failure_rate"});
    auto& plan = cfg.bootstrap;
    plan.iterations = count(b, "iterations", where, plan.iterations);
    plan.seed = seed(b, "seed", where, plan.seed);
    plan.threads = static_cast<unsigned>(count(b, "threads", where, plan.threads));
    plan.max_failure_rate = get<double>(b, "max_failure_rate", where, plan.max_failure_rate);
    const auto unit = get<std::string>(b, "unit", where, "cluster");
    if (unit == "cluster")
      plan.unit = ResampleUnit::kCluster;
    else if (unit == "row")
      plan.unit = ResampleUnit::kRow;
    else
      fail(where, "unit must be 'cluster' or 'row'");
    const auto engine = get<std::string>(b, "engine", where, "multinomial");
    if (engine == "multinomial")
      plan.engine = Engine::kMultinomial;
    else if (engine == "multiplier")
      plan.engine = Engine::kMultiplier;
    else
      fail(where, "engine must be 'multinomial' or 'multiplier'");
    const auto law = get<std::string>(b, "multiplier_law", where, "poisson");
    if (law == "poisson")
      plan.law = MultiplierLaw::kPoissonCentered;
    else if (law == "normal")
      plan.law = MultiplierLaw::kNormal;
    else
      fail(where, "multiplier_law must be 'poisson' or 'normal'");
  }
  if (cfg.bootstrap.iterations == 0) fail("bootstrap", "iterations must be positive");
  if (cfg.bootstrap.threads == 0) fail("bootstrap", "threads must be positive");
  if (!(cfg.bootstrap.max_failure_rate >= 0.0 && cfg.bootstrap.max_failure_rate < 1.0))
    fail("bootstrap", "max_failure_rate must lie in [0, 1)");

  if (doc.contains("test")) {
    const auto& t = doc.at("test");
    const std::string where = "test";
    check_keys(t, where, {"h", "alpha", "norm", "mc_draws", "seed"});
    auto& spec = cfg.test;
    spec.h = get<double>(t, "h", where, spec.h);
    spec.alpha = get<double>(t, "alpha", where, spec.alpha);
    spec.mc_draws = count(t, "mc_draws", where, spec.mc_draws);
    spec.seed = seed(t, "seed", where, spec.seed);
    if (t.contains("norm")) {
      const auto& n = t.at("norm");
      if (n.is_string()) {
        const auto s = n.get<std::string>();
        if (s == "difference")
          spec.norm = NormKind::kDifference;
        else if (s == "identity")
          spec.norm = NormKind::kIdentity;
        else
          fail(where + ".norm", "must be 'difference', 'identity' or a matrix");
      } else {
        std::vector<std::vector<double>> rows;
        try {
          rows = n.get<std::vector<std::vector<double>>>();
        } catch (const json::exception&) {
          fail(where + ".norm", "must be 'difference', 'identity' or a matrix");
        }
        const auto d = static_cast<Eigen::Index>(rows.size());
        spec.norm = NormKind::kUser;
        spec.norm_matrix.resize(d, d);
        for (Eigen::Index r = 0; r < d; ++r) {
          if (static_cast<Eigen::Index>(rows[static_cast<std::size_t>(r)].size()) != d)
            fail(where + ".norm", "matrix must be square");
          for (Eigen::Index c = 0; c < d; ++c) spec.norm_matrix(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
        }
      }
    }
  }
  try {
    validate(cfg.test);
  } catch (const UsageError& e) {
    fail("test", e.what());
  }

  if (!doc.contains("comparisons") || !doc.at("comparisons").is_array() || doc.at("comparisons").empty())
    fail("document", "needs a non-empty 'comparisons' array");
  std::set<std::string> names;
  std::size_t k = 0;
  for (const auto& c : doc.at("comparisons")) {
    cfg.comparisons.push_back(parse_comparison(c, k++, cfg.cluster));
    if (!names.insert(cfg.comparisons.back().name).second)
      fail("comparisons", "duplicate name '" + cfg.comparisons.back().name + "'");
  }
  if (cfg.test.norm == NormKind::kUser)
    for (const auto& c : cfg.comparisons)
      if (cfg.test.norm_matrix.rows() != static_cast<Eigen::Index>(statistic_labels(c).size()))
        fail("test.norm", "matrix size does not match the statistics of comparison '" + c.name + "'");

  if (doc.contains("mc")) cfg.mc = parse_mc(doc.at("mc"));
  return cfg;
}

AnalysisConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cli_io", "cannot open config '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw UsageError("cli_io", "config '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_config(doc, std::filesystem::path(path).parent_path().string());
}

std::vector<std::string> role_columns(const AnalysisConfig& config) {
  std::vector<std::string> out;
  auto add = [&](const std::string& s) {
    if (!s.empty() && std::find(out.begin(), out.end(), s) == out.end()) out.push_back(s);
  };
  for (const auto& l : config.lags) add(l.column);
  for (const auto& c : config.comparisons) {
    if (c.kind == ComparisonKind::kLStat) {
      for (const auto& s : c.statistics) add(s.column);
    } else {
      for (const auto& s : c.model.numeric_columns()) add(s);
    }
    for (const auto* scheme : {&c.baseline, &c.adjusted}) {
      if (const auto* q = std::get_if<QuantileTrim>(scheme))
        for (const auto& col : q->columns) add(col);
      if (const auto* w = std::get_if<Winsorize>(scheme)) add(w->column);
      if (const auto* cw = std::get_if<CustomWeights>(scheme)) add(cw->column);
    }
  }
  return out;
}

std::vector<std::string> statistic_labels(const ComparisonSpec& spec) {
  std::vector<std::string> out;
  if (spec.kind == ComparisonKind::kLStat) {
    for (const auto& s : spec.statistics) out.push_back(s.name);
    return out;
  }
  out = spec.coefficients;
  if (spec.derived) {
    out.push_back("long_run_effect");
    out.push_back("effect_after_25");
    out.push_back("persistence");
  }
  return out;
}

}  // namespace rlstat::io
