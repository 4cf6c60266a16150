#pragma once

#include "harness.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace betakde {

//! Reads one real per line; blank lines are skipped, values must lie in [0, 1].
inline Sample read_sample(std::istream& in)
{
  std::vector<double> points;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos)
      continue;
    const auto last = line.find_last_not_of(" \t\r");
    const std::string token = line.substr(first, last - first + 1);
    double v = 0.0;
    try {
      v = detail::parse_double(token, "sample value");
    } catch (const std::exception&) {
      throw std::invalid_argument("sample line " + std::to_string(lineno) +
                                  ": not a number");
    }
    if (!(v >= 0.0 && v <= 1.0))
      throw std::invalid_argument("sample line " + std::to_string(lineno) +
                                  ": value outside [0, 1]");
    points.push_back(v);
  }
  return Sample(std::move(points));
}

//! A CSV table as written by this library: comment lines, header, numbers.
struct CsvTable
{
  std::vector<std::string> comments;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

inline CsvTable read_csv(std::istream& in)
{
  CsvTable t;
  std::string line;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ','))
      out.push_back(cell);
    return out;
  };
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    if (line.empty())
      continue;
    if (line[0] == '#') {
      t.comments.push_back(line);
      continue;
    }
    if (t.columns.empty()) {
      t.columns = split(line);
      continue;
    }
    std::vector<double> row;
    for (const auto& cell : split(line))
      row.push_back(detail::parse_double(cell, "csv cell"));
    if (row.size() != t.columns.size())
      throw std::invalid_argument("csv row width does not match the header");
    t.rows.push_back(std::move(row));
  }
  if (t.columns.empty())
    throw std::invalid_argument("csv has no header row");
  return t;
}

//! Scatter-and-line plot of column y against column x as standalone SVG.
//! Axes are logarithmic when every value on them is positive.
inline std::string render_svg(const CsvTable& t, const std::string& x_col,
                              const std::string& y_col, const std::string& title)
{
  auto index_of = [&](const std::string& name) {
    const auto it = std::find(t.columns.begin(), t.columns.end(), name);
    if (it == t.columns.end())
      throw std::invalid_argument("csv has no column " + name);
    return static_cast<std::size_t>(it - t.columns.begin());
  };
  const std::size_t ix = index_of(x_col);
  const std::size_t iy = index_of(y_col);
  if (t.rows.empty())
    throw std::invalid_argument("csv has no data rows");

  std::vector<double> xs, ys;
  for (const auto& r : t.rows) {
    xs.push_back(r[ix]);
    ys.push_back(r[iy]);
  }
  const bool log_x = std::all_of(xs.begin(), xs.end(), [](double v) { return v > 0.0; });
  const bool log_y = std::all_of(ys.begin(), ys.end(), [](double v) { return v > 0.0; });
  auto tx = [&](double v) { return log_x ? std::log10(v) : v; };
  auto ty = [&](double v) { return log_y ? std::log10(v) : v; };

  double x0 = tx(xs[0]), x1 = x0, y0 = ty(ys[0]), y1 = y0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    x0 = std::min(x0, tx(xs[i]));
    x1 = std::max(x1, tx(xs[i]));
    y0 = std::min(y0, ty(ys[i]));
    y1 = std::max(y1, ty(ys[i]));
  }
  if (x1 == x0) {
    x0 -= 0.5;
    x1 += 0.5;
  }
  if (y1 == y0) {
    y0 -= 0.5;
    y1 += 0.5;
  }
  const double padx = 0.05 * (x1 - x0), pady = 0.05 * (y1 - y0);
  x0 -= padx;
  x1 += padx;
  y0 -= pady;
  y1 += pady;

  constexpr double W = 640, H = 440, L = 80, R = 20, T = 40, B = 60;
  auto px = [&](double v) { return L + (tx(v) - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double v) { return H - B - (ty(v) - y0) / (y1 - y0) * (H - T - B); };
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return std::string(buf);
  };
  auto escape = [](const std::string& s) {
    std::string out;
    for (char ch : s) {
      if (ch == '<')
        out += "&lt;";
      else if (ch == '>')
        out += "&gt;";
      else if (ch == '&')
        out += "&amp;";
      else
        out += ch;
    }
    return out;
  };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">"
      << escape(title) << "</text>\n";
  svg << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\""
      << H - T - B << "\" fill=\"none\" stroke=\"black\"/>\n";

  auto ticks = [](double lo, double hi, bool log_axis) {
    std::vector<double> out;
    if (log_axis) {
      for (double e = std::ceil(lo); e <= hi; e += 1.0)
        out.push_back(e);
      return out;
    }
    const double step = std::pow(10.0, std::floor(std::log10((hi - lo) / 5.0)));
    for (double v = std::ceil(lo / step) * step; v <= hi; v += step)
      out.push_back(v);
    return out;
  };
  for (double v : ticks(x0, x1, log_x)) {
    const double xv = log_x ? std::pow(10.0, v) : v;
    const double p = px(xv);
    svg << "<line x1=\"" << p << "\" y1=\"" << H - B << "\" x2=\"" << p << "\" y2=\""
        << H - B + 5 << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << p << "\" y=\"" << H - B + 18 << "\" text-anchor=\"middle\">"
        << num(xv) << "</text>\n";
  }
  for (double v : ticks(y0, y1, log_y)) {
    const double yv = log_y ? std::pow(10.0, v) : v;
    const double p = py(yv);
    svg << "<line x1=\"" << L - 5 << "\" y1=\"" << p << "\" x2=\"" << L << "\" y2=\"" << p
        << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << L - 8 << "\" y=\"" << p + 4 << "\" text-anchor=\"end\">"
        << num(yv) << "</text>\n";
  }
  svg << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 15
      << "\" text-anchor=\"middle\">" << escape(x_col) << (log_x ? " (log)" : "")
      << "</text>\n";
  svg << "<text transform=\"translate(18," << (T + H - B) / 2
      << ") rotate(-90)\" text-anchor=\"middle\">" << escape(y_col)
      << (log_y ? " (log)" : "") << "</text>\n";

  svg << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\" points=\"";
  for (std::size_t i = 0; i < xs.size(); ++i)
    svg << (i ? " " : "") << px(xs[i]) << ',' << py(ys[i]);
  svg << "\"/>\n";
  for (std::size_t i = 0; i < xs.size(); ++i)
    svg << "<circle cx=\"" << px(xs[i]) << "\" cy=\"" << py(ys[i])
        << "\" r=\"3\" fill=\"steelblue\"/>\n";
  svg << "</svg>\n";
  return svg.str();
}

namespace detail {

inline std::string read_file(const std::string& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw std::invalid_argument("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& text)
{
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw std::runtime_error("cannot write " + path);
  out << text;
}

struct UsageError : std::runtime_error
{
  using std::runtime_error::runtime_error;
};

} // namespace detail

//! Entry point of the betakde tool.
//! Exit codes: 0 success, 1 quadrature gate failure, 2 usage error.
inline int cli_main(int argc, const char* const* argv,
                    std::ostream& out = std::cout, std::ostream& err = std::cerr)
{
  CLI::App app{ "Beta kernel density estimation on [0, 1]", "betakde" };
  app.set_version_flag("--version", std::string(version));
  app.require_subcommand(1);

  auto* kernel_cmd = app.add_subcommand("kernel-eval", "Evaluate K_{t,b}(x)");
  double k_t = 0.0, k_b = 0.0;
  std::vector<double> k_x;
  kernel_cmd->add_option("--t", k_t, "Kernel mode t in [0, 1]")->required();
  kernel_cmd->add_option("--b", k_b, "Bandwidth b in (0, 1)")->required();
  kernel_cmd->add_option("--x", k_x, "Evaluation points in [0, 1]")->required();

  auto* est_cmd = app.add_subcommand("estimate", "Evaluate the estimator on a grid");
  std::string e_input, e_out;
  double e_b = 0.0;
  std::size_t e_grid = 101;
  est_cmd->add_option("--input", e_input, "Sample file, one value per line")->required();
  est_cmd->add_option("--b", e_b, "Bandwidth b in (0, 1)")->required();
  est_cmd->add_option("--grid", e_grid, "Number of equispaced t in [0, 1] (>= 2)");
  est_cmd->add_option("--out", e_out, "Output CSV (stdout when omitted)");

  auto* risk_cmd = app.add_subcommand("risk", "Monte Carlo L^p risk");
  std::string r_density, r_out;
  double r_b = 0.0, r_p = 2.0;
  std::size_t r_n = 0, r_reps = 200, r_nodes = Quadrature::default_min_nodes;
  std::uint64_t r_seed = 1;
  risk_cmd->add_option("--density", r_density, "uniform | linear | cosine:a=.. | "
                                                "sawtooth:beta=..,L=..")
    ->required();
  risk_cmd->add_option("--b", r_b, "Bandwidth b in (0, 1)")->required();
  risk_cmd->add_option("--n", r_n, "Sample size")->required();
  risk_cmd->add_option("--p", r_p, "Loss exponent p >= 1");
  risk_cmd->add_option("--reps", r_reps, "Replications (>= 2)");
  risk_cmd->add_option("--seed", r_seed, "Seed");
  risk_cmd->add_option("--nodes", r_nodes, "Minimum quadrature nodes");
  risk_cmd->add_option("--out", r_out, "Output CSV (stdout when omitted)");

  auto* exp_cmd = app.add_subcommand("experiment", "Run an experiment from a JSON config");
  std::string x_tag, x_config, x_out;
  exp_cmd->add_option("tag", x_tag, "rate | bias-floor | sawtooth-bias | log-factor | "
                                    "lemma4-check | bound-suite")
    ->required();
  exp_cmd->add_option("--config", x_config, "Config file (JSON)")->required();
  exp_cmd->add_option("--out", x_out, "Output directory")->required();

  auto* plot_cmd = app.add_subcommand("plot", "Plot one CSV column against another");
  std::string p_in, p_out, p_x, p_y;
  plot_cmd->add_option("--in", p_in, "Input CSV")->required();
  plot_cmd->add_option("--out", p_out, "Output SVG")->required();
  plot_cmd->add_option("--x", p_x, "Abscissa column (default: first)");
  plot_cmd->add_option("--y", p_y, "Ordinate column (default: second)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForVersion& e) {
    out << version << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "betakde: " << e.what() << '\n';
    return 2;
  }

  auto emit = [&](const std::string& path, const std::string& text) {
    if (path.empty())
      out << text;
    else
      detail::write_file(path, text);
  };

  try {
    if (*kernel_cmd) {
      const BetaKernel k(k_t, k_b);
      // 15 significant digits: every digit printed is one a double carries
      for (double x : k_x) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.15g", evaluate(k, x));
        out << buf << '\n';
      }
      return 0;
    }

    if (*est_cmd) {
      if (e_grid < 2)
        throw detail::UsageError("--grid must be >= 2");
      std::ifstream in(e_input);
      if (!in)
        throw detail::UsageError("cannot open " + e_input);
      const auto est = fit(read_sample(in), e_b);
      std::vector<double> grid(e_grid);
      for (std::size_t i = 0; i < e_grid; ++i)
        grid[i] = static_cast<double>(i) / static_cast<double>(e_grid - 1);
      grid.back() = 1.0;
      const auto values = evaluate_grid(est, grid);
      const nlohmann::json cfg{ { "run", "estimate" },
                                { "b", e_b },
                                { "grid", e_grid },
                                { "n", est.n() },
                                { "sample_hash", fnv1a(detail::read_file(e_input)) } };
      std::ostringstream csv;
      char hash[17];
      std::snprintf(hash, sizeof hash, "%016llx",
                    static_cast<unsigned long long>(fnv1a(cfg.dump())));
      write_metadata(csv, "estimate", 0, hash, cfg.dump());
      csv << "t,estimate\n";
      for (std::size_t i = 0; i < grid.size(); ++i)
        csv << format_number(grid[i]) << ',' << format_number(values[i]) << '\n';
      emit(e_out, csv.str());
      return 0;
    }

    if (*risk_cmd) {
      const TestDensity d = parse_density(r_density, r_b);
      const auto q = Quadrature::for_bandwidth(r_b, r_nodes);
      const auto mc = mc_risk(d, r_b, r_n, r_p, r_reps, r_seed, q);
      const nlohmann::json cfg{ { "run", "risk" },   { "density", d.spec() },
                                { "b", r_b },        { "n", r_n },
                                { "p", r_p },        { "reps", r_reps },
                                { "seed", r_seed },  { "nodes", r_nodes } };
      std::ostringstream csv;
      char hash[17];
      std::snprintf(hash, sizeof hash, "%016llx",
                    static_cast<unsigned long long>(fnv1a(cfg.dump())));
      write_metadata(csv, "risk", r_seed, hash, cfg.dump());
      csv << "risk,stderr,reps,p,mean_loss,loss_stderr\n"
          << format_number(mc.value) << ',' << format_number(mc.std_error) << ','
          << mc.reps << ',' << format_number(mc.p) << ',' << format_number(mc.mean_loss)
          << ',' << format_number(mc.loss_stderr) << '\n';
      emit(r_out, csv.str());
      return 0;
    }

    if (*exp_cmd) {
      ExperimentConfig cfg;
      try {
        cfg = parse_config(detail::read_file(x_config));
      } catch (const nlohmann::json::exception& e) {
        throw detail::UsageError(std::string("config: ") + e.what());
      }
      if (cfg.experiment != x_tag)
        throw detail::UsageError("config is for experiment '" + cfg.experiment +
                                 "', not '" + x_tag + "'");
      std::filesystem::create_directories(x_out);
      const auto report = run_experiment(cfg);
      std::ostringstream csv;
      write_csv(csv, report);
      const auto path = (std::filesystem::path(x_out) / (x_tag + ".csv")).string();
      detail::write_file(path, csv.str());
      out << "wrote " << path << '\n';
      if (report.fit)
        out << "slope " << format_number(report.fit->slope) << " (stderr "
            << format_number(report.fit->slope_stderr) << ", r^2 "
            << format_number(report.fit->r_squared) << ")\n";
      for (const auto& c : report.checks)
        out << (c.passed ? "pass " : "FAIL ") << c.description << " [value "
            << format_number(c.value) << "]\n";
      if (report.gate.applied) {
        out << (report.gate.passed() ? "pass " : "FAIL ")
            << "quadrature gate: max relative change "
            << format_number(report.gate.max_rel_change) << " <= "
            << format_number(report.gate.tolerance) << '\n';
        if (!report.gate.passed())
          return 1;
      }
      return 0;
    }

    if (*plot_cmd) {
      std::ifstream in(p_in);
      if (!in)
        throw detail::UsageError("cannot open " + p_in);
      const CsvTable t = read_csv(in);
      if (t.columns.size() < 2 && (p_x.empty() || p_y.empty()))
        throw detail::UsageError("csv needs two columns to plot");
      const std::string xc = p_x.empty() ? t.columns[0] : p_x;
      const std::string yc = p_y.empty() ? t.columns[1] : p_y;
      detail::write_file(p_out, render_svg(t, xc, yc, yc + " vs " + xc));
      return 0;
    }
  } catch (const std::exception& e) {
    err << "betakde: " << e.what() << '\n';
    return 2;
  }
  return 2;
}

} // namespace betakde
