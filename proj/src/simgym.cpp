#include "sbikit/simgym.hpp"

#include <json.hpp>

#include <atomic>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

namespace sbikit {

using nlohmann::json;

int SimulationBatch::valid_count() const {
  int c = 0;
  for (auto v : valid) c += v ? 1 : 0;
  return c;
}

SimulationBatch SimulationBatch::empty(int theta_dim, int x_dim) {
  SimulationBatch b;
  b.theta = MatrixXd(0, theta_dim);
  b.x = MatrixXd(0, x_dim);
  return b;
}

namespace {

bool row_finite(const MatrixXd& m, int i) {
  for (int j = 0; j < m.cols(); ++j)
    if (!std::isfinite(m(i, j))) return false;
  return true;
}

void compute_validity(SimulationBatch& b) {
  b.valid.assign(b.n(), 1);
  for (int i = 0; i < b.n(); ++i)
    b.valid[i] = (row_finite(b.theta, i) && row_finite(b.x, i)) ? 1 : 0;
}

}  // namespace

SimulationBatch simulate_at(const MatrixXd& thetas, const Simulator& sim,
                            int workers, std::uint64_t seed) {
  const int n = static_cast<int>(thetas.rows());
  if (n < 1) throw std::invalid_argument("simulate: n must be >= 1");
  if (workers < 1) throw std::invalid_argument("simulate: workers must be >= 1");
  if (thetas.cols() != sim.theta_dim)
    throw std::invalid_argument("simulate: theta dim mismatch with simulator");

  std::vector<std::uint64_t> row_seeds(n);
  for (int i = 0; i < n; ++i) row_seeds[i] = derive_seed(seed, "row", i);

  const int chunk = (n + 4 * workers - 1) / (4 * workers);
  const int n_chunks = (n + chunk - 1) / chunk;

  MatrixXd x(n, sim.x_dim);
  std::vector<std::string> chunk_errors(n_chunks);
  std::atomic<int> next{0};

  auto run_worker = [&]() {
    for (;;) {
      int c = next.fetch_add(1);
      if (c >= n_chunks) break;
      int lo = c * chunk;
      int len = std::min(chunk, n - lo);
      std::vector<std::uint64_t> seeds(row_seeds.begin() + lo,
                                       row_seeds.begin() + lo + len);
      try {
        MatrixXd out = sim.fn(thetas.middleRows(lo, len), seeds);
        if (out.rows() != len || out.cols() != sim.x_dim)
          throw std::runtime_error("simulator returned wrong shape");
        x.middleRows(lo, len) = out;
      } catch (const std::exception& e) {
        x.middleRows(lo, len).setConstant(std::numeric_limits<double>::quiet_NaN());
        chunk_errors[c] = e.what();
      }
    }
  };

  if (workers == 1) {
    run_worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(run_worker);
    for (auto& t : pool) t.join();
  }

  SimulationBatch b;
  b.theta = thetas;
  b.x = std::move(x);
  b.seed = seed;
  std::ostringstream prov;
  prov << "simulator=" << sim.name;
  for (int c = 0; c < n_chunks; ++c)
    if (!chunk_errors[c].empty())
      prov << ";chunk " << c << " failed: " << chunk_errors[c];
  b.provenance = prov.str();
  compute_validity(b);
  if (b.valid_count() == 0)
    throw NumericError("simulate: simulator failed on every row (" +
                       b.provenance + ")");
  return b;
}

SimulationBatch simulate_for_sbi(const Distribution& prior, const Simulator& sim,
                                 int n, int workers, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("simulate_for_sbi: n must be >= 1");
  if (prior.dim() != sim.theta_dim)
    throw std::invalid_argument("simulate_for_sbi: prior dim != simulator theta dim");
  Rng theta_rng(derive_seed(seed, "theta"));
  MatrixXd thetas = prior.sample(n, theta_rng);
  return simulate_at(thetas, sim, workers, seed);
}

SimulationBatch filter_valid(const SimulationBatch& b, int* dropped) {
  int kept = b.valid_count();
  if (kept == 0) throw NumericError("filter_valid: no valid rows remain");
  SimulationBatch out;
  out.theta = MatrixXd(kept, b.theta_dim());
  out.x = MatrixXd(kept, b.x_dim());
  int r = 0;
  for (int i = 0; i < b.n(); ++i) {
    if (!b.valid[i]) continue;
    out.theta.row(r) = b.theta.row(i);
    out.x.row(r) = b.x.row(i);
    ++r;
  }
  out.valid.assign(kept, 1);
  out.seed = b.seed;
  int n_dropped = b.n() - kept;
  out.provenance = b.provenance;
  if (n_dropped > 0)
    out.provenance += ";filtered: dropped " + std::to_string(n_dropped) + " of " +
                      std::to_string(b.n());
  if (dropped) *dropped = n_dropped;
  return out;
}

SimulationBatch append(const SimulationBatch& a, const SimulationBatch& b) {
  if (a.theta_dim() != b.theta_dim() || a.x_dim() != b.x_dim())
    throw std::invalid_argument("append: batch dimensions do not match");
  SimulationBatch out;
  out.theta = MatrixXd(a.n() + b.n(), a.theta_dim());
  out.theta << a.theta, b.theta;
  out.x = MatrixXd(a.n() + b.n(), a.x_dim());
  out.x << a.x, b.x;
  out.valid = a.valid;
  out.valid.insert(out.valid.end(), b.valid.begin(), b.valid.end());
  out.seed = a.seed;
  out.provenance = a.provenance;
  if (!b.provenance.empty()) out.provenance += "|" + b.provenance;
  return out;
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

std::vector<std::string> batch_columns(int theta_dim, int x_dim) {
  std::vector<std::string> cols;
  for (int j = 0; j < theta_dim; ++j) cols.push_back("theta_" + std::to_string(j));
  for (int j = 0; j < x_dim; ++j) cols.push_back("x_" + std::to_string(j));
  cols.push_back("valid");
  return cols;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  cells.push_back(cur);
  return cells;
}

double parse_cell(const std::string& cell, const std::string& path, int line_no) {
  const char* s = cell.c_str();
  char* end = nullptr;
  double v = std::strtod(s, &end);
  if (end == s || *end != '\0')
    throw ConfigError(path + ": non-numeric cell \"" + cell + "\" on line " +
                      std::to_string(line_no));
  return v;
}

}  // namespace

void save_batch(const SimulationBatch& b, const std::string& csv_path,
                const std::string& json_path) {
  json header{{"theta_dim", b.theta_dim()},
              {"x_dim", b.x_dim()},
              {"n", b.n()},
              {"seed", b.seed},
              {"provenance", b.provenance},
              {"columns", batch_columns(b.theta_dim(), b.x_dim())}};
  std::ofstream jf(json_path);
  if (!jf) throw ConfigError("cannot write " + json_path);
  jf << header.dump(2) << "\n";

  std::ofstream cf(csv_path);
  if (!cf) throw ConfigError("cannot write " + csv_path);
  auto cols = batch_columns(b.theta_dim(), b.x_dim());
  for (size_t j = 0; j < cols.size(); ++j)
    cf << cols[j] << (j + 1 < cols.size() ? "," : "\n");
  for (int i = 0; i < b.n(); ++i) {
    for (int j = 0; j < b.theta_dim(); ++j) cf << format_double(b.theta(i, j)) << ",";
    for (int j = 0; j < b.x_dim(); ++j) cf << format_double(b.x(i, j)) << ",";
    cf << int(b.valid[i]) << "\n";
  }
}

namespace {

SimulationBatch read_batch_csv(const std::string& csv_path, int theta_dim,
                               int x_dim, bool recompute_validity) {
  std::ifstream cf(csv_path);
  if (!cf) throw ConfigError("cannot read " + csv_path);
  std::string line;
  int line_no = 0;

  if (!std::getline(cf, line)) throw ConfigError(csv_path + ": empty file");
  ++line_no;
  auto header_cells = split_csv_line(line);
  const size_t want = static_cast<size_t>(theta_dim + x_dim);
  bool has_valid_col;
  if (header_cells.size() == want + 1 && header_cells.back() == "valid")
    has_valid_col = true;
  else if (header_cells.size() == want)
    has_valid_col = false;
  else
    throw ConfigError(csv_path + ": header has " +
                      std::to_string(header_cells.size()) + " columns, expected " +
                      std::to_string(want) + " (plus optional \"valid\") on line 1");

  std::vector<double> values;
  std::vector<std::uint8_t> valid;
  int n = 0;
  const size_t ncols = want + (has_valid_col ? 1 : 0);
  while (std::getline(cf, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto cells = split_csv_line(line);
    if (cells.size() != ncols)
      throw ConfigError(csv_path + ": expected " + std::to_string(ncols) +
                        " columns but found " + std::to_string(cells.size()) +
                        " on line " + std::to_string(line_no));
    for (size_t j = 0; j < want; ++j)
      values.push_back(parse_cell(cells[j], csv_path, line_no));
    if (has_valid_col) {
      double v = parse_cell(cells[want], csv_path, line_no);
      valid.push_back(v != 0.0 ? 1 : 0);
    }
    ++n;
  }
  if (n == 0) throw ConfigError(csv_path + ": no data rows");

  SimulationBatch b;
  b.theta = MatrixXd(n, theta_dim);
  b.x = MatrixXd(n, x_dim);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < theta_dim; ++j) b.theta(i, j) = values[i * want + j];
    for (int j = 0; j < x_dim; ++j) b.x(i, j) = values[i * want + theta_dim + j];
  }
  if (recompute_validity || !has_valid_col)
    compute_validity(b);
  else
    b.valid = std::move(valid);
  return b;
}

}  // namespace

SimulationBatch load_batch(const std::string& csv_path,
                           const std::string& json_path) {
  std::ifstream jf(json_path);
  if (!jf) throw ConfigError("cannot read " + json_path);
  json header = json::parse(jf);
  int theta_dim = header.at("theta_dim").get<int>();
  int x_dim = header.at("x_dim").get<int>();
  SimulationBatch b = read_batch_csv(csv_path, theta_dim, x_dim,
                                     /*recompute_validity=*/false);
  b.seed = header.at("seed").get<std::uint64_t>();
  b.provenance = header.value("provenance", "");
  if (header.contains("n") && header.at("n").get<int>() != b.n())
    throw ConfigError(json_path + ": header n does not match CSV row count");
  return b;
}

SimulationBatch import_batch_csv(const std::string& csv_path, int theta_dim,
                                 int x_dim) {
  if (theta_dim < 1 || x_dim < 1)
    throw ConfigError("import: theta and x dimensions must be >= 1");
  SimulationBatch b = read_batch_csv(csv_path, theta_dim, x_dim,
                                     /*recompute_validity=*/true);
  b.provenance = "imported from " + csv_path;
  return b;
}

}  // namespace sbikit
