#include "simgap/dataset.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

#include "simgap/error.hpp"
#include "simgap/parallel.hpp"
#include "simgap/rng.hpp"

namespace simgap {

namespace {

std::string fmt_double(double v) { return format_double(v); }

double parse_header_double(const std::string& s) {
  try {
    return parse_double(s);
  } catch (const InvalidArgument&) {
    throw CorruptDataset("dataset header: bad number '" + s + "'");
  }
}

std::uint64_t parse_u64(const std::string& s) {
  std::uint64_t v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw CorruptDataset("dataset header: bad integer '" + s + "'");
  return v;
}

void put_u64(std::string& out, std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::big) v = __builtin_bswap64(v);
  char b[8];
  std::memcpy(b, &v, 8);
  out.append(b, 8);
}

void put_f64(std::string& out, double d) {
  put_u64(out, std::bit_cast<std::uint64_t>(d));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : s_(bytes) {}

  std::string line(const char* what) {
    auto nl = s_.find('\n', pos_);
    if (nl == std::string::npos)
      throw CorruptDataset(std::string("dataset truncated while reading ") + what);
    std::string l = s_.substr(pos_, nl - pos_);
    pos_ = nl + 1;
    return l;
  }

  /// Reads "key v1 v2 ..." and returns the value tokens.
  std::vector<std::string> keyed(const std::string& key) {
    std::istringstream is(line(key.c_str()));
    std::string k;
    is >> k;
    if (k != key)
      throw CorruptDataset("dataset header: expected '" + key + "', found '" +
                           k + "'");
    std::vector<std::string> vals;
    std::string t;
    while (is >> t) vals.push_back(t);
    return vals;
  }

  std::string single(const std::string& key) {
    auto v = keyed(key);
    if (v.size() != 1)
      throw CorruptDataset("dataset header: '" + key + "' needs one value");
    return v[0];
  }

  bool u64(std::uint64_t& v) {
    if (s_.size() - pos_ < 8) return false;
    std::memcpy(&v, s_.data() + pos_, 8);
    if constexpr (std::endian::native == std::endian::big)
      v = __builtin_bswap64(v);
    pos_ += 8;
    return true;
  }

  bool f64(double& d) {
    std::uint64_t v;
    if (!u64(v)) return false;
    d = std::bit_cast<double>(v);
    return true;
  }

  std::string rest() const { return s_.substr(pos_); }

 private:
  const std::string& s_;
  std::size_t pos_ = 0;
};

std::string record_name(std::size_t r, std::size_t j) {
  return "record (r=" + std::to_string(r) + ", j=" + std::to_string(j) + ")";
}

}  // namespace

Vec Dataset::empirical_mean(const DatasetRecord& rec) const {
  const std::size_t n = spec.state_dim;
  Vec mean(n, 0.0);
  for (std::size_t k = 0; k < n_hat_1; ++k)
    for (std::size_t i = 0; i < n; ++i) mean[i] += rec.replicates[k * n + i];
  for (double& v : mean) v /= static_cast<double>(n_hat_1);
  return mean;
}

void Dataset::check() const {
  const std::size_t n = spec.state_dim, M = spec.input_count();
  if (cover.dim() != n) throw CorruptDataset("cover dimension does not match n");
  if (complete && records.size() != expected_records())
    throw CorruptDataset("dataset has " + std::to_string(records.size()) +
                         " records, expected " +
                         std::to_string(expected_records()));
  for (std::size_t idx = 0; idx < records.size(); ++idx) {
    const auto& rec = records[idx];
    if (rec.r != idx / M || rec.j != idx % M)
      throw CorruptDataset(record_name(rec.r, rec.j) + " is out of canonical "
                           "order at position " + std::to_string(idx));
    if (rec.nominal.size() != n || !all_finite(rec.nominal))
      throw CorruptDataset(record_name(rec.r, rec.j) + ": bad nominal row");
    if (rec.replicates.size() != n_hat_1 * n || rec.seeds.size() != n_hat_1)
      throw CorruptDataset(record_name(rec.r, rec.j) + " has " +
                           std::to_string(rec.seeds.size()) +
                           " replicate rows, expected " +
                           std::to_string(n_hat_1));
    if (!all_finite(rec.replicates))
      throw CorruptDataset(record_name(rec.r, rec.j) +
                           ": non-finite replicate entry");
  }
}

std::uint64_t replicate_seed(std::uint64_t master, std::size_t r, std::size_t j,
                             std::size_t k) {
  return derive_seed(master, {r, j, k});
}

Dataset collect_dataset(const NominalModel& model, const Simulator& sim,
                        const Cover& cover, std::size_t n_hat_1,
                        std::uint64_t master_seed,
                        const CollectOptions& options) {
  const SystemSpec& spec = model.spec();
  if (sim.spec().state_dim != spec.state_dim ||
      sim.spec().input_dim != spec.input_dim || sim.spec().tau != spec.tau)
    throw InvalidArgument("collect: simulator and nominal model specs differ");
  if (cover.dim() != spec.state_dim)
    throw InvalidArgument("collect: cover dimension does not match the system");
  if (n_hat_1 < 1) throw InvalidArgument("collect: n_hat_1 must be >= 1");

  Dataset ds;
  ds.spec = spec;
  ds.cover = cover;
  ds.n_hat_1 = n_hat_1;
  ds.master_seed = master_seed;
  ds.simulator = sim.describe();

  const std::size_t n = spec.state_dim;
  const std::size_t M = spec.input_count();
  const std::size_t total = cover.size() * M;

  std::size_t start = 0;
  if (options.resume) {
    const Dataset& prev = *options.resume;
    if (prev.n_hat_1 != n_hat_1 || prev.master_seed != master_seed ||
        prev.cover.size() != cover.size() || prev.spec.input_count() != M)
      throw InvalidArgument("collect: resume dataset header does not match");
    start = prev.records.size();
  }
  ds.records.resize(total);
  if (options.resume)
    std::copy(options.resume->records.begin(), options.resume->records.end(),
              ds.records.begin());

  std::vector<std::unique_ptr<Simulator>> sims;
  const std::size_t workers = std::max<std::size_t>(1, options.workers);
  for (std::size_t w = 0; w < workers; ++w) sims.push_back(sim.clone());

  auto sweep = parallel_sweep(total - start, workers, [&](std::size_t w,
                                                          std::size_t off) {
    const std::size_t idx = start + off;
    const std::size_t r = idx / M, j = idx % M;
    const Vec& x = cover.centers[r];
    const Vec& u = spec.input_grid[j];
    DatasetRecord rec;
    rec.r = r;
    rec.j = j;
    rec.nominal = model.step(x, u);
    rec.replicates.resize(n_hat_1 * n);
    rec.seeds.resize(n_hat_1);
    for (std::size_t k = 0; k < n_hat_1; ++k) {
      const std::uint64_t seed = replicate_seed(master_seed, r, j, k);
      Vec next;
      try {
        next = sims[w]->step(x, u, seed);
      } catch (const SimulatorIoError& e) {
        throw e.at("(r=" + std::to_string(r) + ", j=" + std::to_string(j) +
                   ", k=" + std::to_string(k) + ")");
      }
      if (next.size() != n)
        throw SimulatorIoError("simulator returned wrong state dimension");
      std::copy(next.begin(), next.end(), rec.replicates.begin() + k * n);
      rec.seeds[k] = seed;
    }
    ds.records[idx] = std::move(rec);
  });

  if (sweep.error) {
    ds.records.resize(start + sweep.first_failure);
    ds.complete = false;
    if (options.checkpoint) save_dataset(ds, *options.checkpoint);
    std::rethrow_exception(sweep.error);
  }
  return ds;
}

std::string serialize_dataset(const Dataset& ds) {
  const std::size_t n = ds.spec.state_dim, m = ds.spec.input_dim;
  std::ostringstream h;
  h << kDatasetMagic << '\n';
  h << "version " << kDatasetVersion << '\n';
  h << "n " << n << '\n';
  h << "m " << m << '\n';
  h << "tau " << fmt_double(ds.spec.tau) << '\n';
  h << "epsilon " << fmt_double(ds.cover.epsilon) << '\n';
  h << "N " << ds.cover.size() << '\n';
  h << "M " << ds.spec.input_count() << '\n';
  h << "n_hat_1 " << ds.n_hat_1 << '\n';
  h << "master_seed " << ds.master_seed << '\n';
  h << "complete " << (ds.complete ? 1 : 0) << '\n';
  h << "records " << ds.records.size() << '\n';
  h << "simulator " << ds.simulator << '\n';
  h << "state_box";
  for (const auto& iv : ds.spec.state_box)
    h << ' ' << fmt_double(iv.lo) << ' ' << fmt_double(iv.hi);
  h << '\n';
  h << "cover_box";
  for (const auto& iv : ds.cover.box)
    h << ' ' << fmt_double(iv.lo) << ' ' << fmt_double(iv.hi);
  h << '\n';
  h << "spacing";
  for (double s : ds.cover.per_axis_spacing) h << ' ' << fmt_double(s);
  h << '\n';
  h << "counts";
  for (std::size_t c : ds.cover.per_axis_count) h << ' ' << c;
  h << '\n';
  h << "body\n";

  std::string out = h.str();
  for (const auto& c : ds.cover.centers)
    for (double v : c) put_f64(out, v);
  for (const auto& u : ds.spec.input_grid)
    for (double v : u) put_f64(out, v);
  for (const auto& rec : ds.records) {
    put_u64(out, rec.r);
    put_u64(out, rec.j);
    put_u64(out, rec.seeds.size());
    for (double v : rec.nominal) put_f64(out, v);
    for (std::size_t k = 0; k < rec.seeds.size(); ++k) {
      put_u64(out, rec.seeds[k]);
      for (std::size_t i = 0; i < n; ++i) put_f64(out, rec.replicates[k * n + i]);
    }
  }
  out += "\nSIMGAP-END\n";
  return out;
}

Dataset deserialize_dataset(const std::string& bytes) {
  Reader rd(bytes);
  if (rd.line("magic") != kDatasetMagic)
    throw CorruptDataset("not a dataset file (bad magic)");
  const auto version = parse_u64(rd.single("version"));
  if (version != static_cast<std::uint64_t>(kDatasetVersion))
    throw CorruptDataset("dataset schema version " + std::to_string(version) +
                         " is not supported (expected " +
                         std::to_string(kDatasetVersion) + ")");
  Dataset ds;
  const std::size_t n = parse_u64(rd.single("n"));
  const std::size_t m = parse_u64(rd.single("m"));
  ds.spec.state_dim = n;
  ds.spec.input_dim = m;
  ds.spec.tau = parse_header_double(rd.single("tau"));
  ds.cover.epsilon = parse_header_double(rd.single("epsilon"));
  const std::size_t N = parse_u64(rd.single("N"));
  const std::size_t M = parse_u64(rd.single("M"));
  ds.n_hat_1 = parse_u64(rd.single("n_hat_1"));
  ds.master_seed = parse_u64(rd.single("master_seed"));
  ds.complete = parse_u64(rd.single("complete")) != 0;
  const std::size_t nrec = parse_u64(rd.single("records"));
  {
    std::string l = rd.line("simulator");
    if (l.rfind("simulator ", 0) != 0)
      throw CorruptDataset("dataset header: expected 'simulator'");
    ds.simulator = l.substr(10);
  }
  auto read_box = [&](const std::string& key) {
    auto v = rd.keyed(key);
    if (v.size() != 2 * n) throw CorruptDataset("dataset header: bad " + key);
    Box b(n);
    for (std::size_t i = 0; i < n; ++i)
      b[i] = {parse_header_double(v[2 * i]), parse_header_double(v[2 * i + 1])};
    return b;
  };
  ds.spec.state_box = read_box("state_box");
  ds.cover.box = read_box("cover_box");
  for (const auto& s : rd.keyed("spacing"))
    ds.cover.per_axis_spacing.push_back(parse_header_double(s));
  for (const auto& s : rd.keyed("counts"))
    ds.cover.per_axis_count.push_back(parse_u64(s));
  if (ds.cover.per_axis_spacing.size() != n ||
      ds.cover.per_axis_count.size() != n)
    throw CorruptDataset("dataset header: bad spacing/counts");
  if (rd.line("body") != "body")
    throw CorruptDataset("dataset header: missing body marker");
  if (nrec > N * M) throw CorruptDataset("dataset header: too many records");

  ds.cover.centers.assign(N, Vec(n));
  for (auto& c : ds.cover.centers)
    for (double& v : c)
      if (!rd.f64(v)) throw CorruptDataset("dataset truncated in cover centers");
  ds.spec.input_grid.assign(M, Vec(m));
  for (auto& u : ds.spec.input_grid)
    for (double& v : u)
      if (!rd.f64(v)) throw CorruptDataset("dataset truncated in input grid");

  ds.records.resize(nrec);
  for (std::size_t idx = 0; idx < nrec; ++idx) {
    auto& rec = ds.records[idx];
    const std::size_t er = M ? idx / M : 0, ej = M ? idx % M : 0;
    std::uint64_t r, j, count;
    if (!rd.u64(r) || !rd.u64(j) || !rd.u64(count))
      throw CorruptDataset(record_name(er, ej) + ": truncated record header");
    if (r != er || j != ej)
      throw CorruptDataset(record_name(er, ej) + ": found provenance (r=" +
                           std::to_string(r) + ", j=" + std::to_string(j) + ")");
    rec.r = r;
    rec.j = j;
    if (count != ds.n_hat_1)
      throw CorruptDataset(record_name(r, j) + " has " + std::to_string(count) +
                           " replicate rows, expected " +
                           std::to_string(ds.n_hat_1));
    rec.nominal.resize(n);
    for (double& v : rec.nominal)
      if (!rd.f64(v))
        throw CorruptDataset(record_name(r, j) + ": truncated nominal row");
    rec.seeds.resize(count);
    rec.replicates.resize(count * n);
    for (std::size_t k = 0; k < count; ++k) {
      bool ok = rd.u64(rec.seeds[k]);
      for (std::size_t i = 0; ok && i < n; ++i) ok = rd.f64(rec.replicates[k * n + i]);
      if (!ok)
        throw CorruptDataset(record_name(r, j) + ": missing replicate row " +
                             std::to_string(k));
    }
  }
  if (rd.rest() != "\nSIMGAP-END\n")
    throw CorruptDataset("dataset end marker missing or trailing bytes present");
  ds.check();
  return ds;
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
  const std::string bytes = serialize_dataset(ds);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw Error("failed writing " + path.string());
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw MissingArtifact("dataset not found: " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(is)),
                    std::istreambuf_iterator<char>());
  return deserialize_dataset(bytes);
}

void export_dataset_csv(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  const std::size_t n = ds.spec.state_dim, m = ds.spec.input_dim;
  os << "r,j,k";
  for (std::size_t i = 0; i < n; ++i) os << ",x" << i + 1;
  for (std::size_t i = 0; i < m; ++i) os << ",u" << i + 1;
  for (std::size_t i = 0; i < n; ++i) os << ",next" << i + 1;
  os << '\n';
  auto row = [&](const DatasetRecord& rec, long k, const double* next) {
    os << rec.r << ',' << rec.j << ',' << k;
    for (double v : ds.cover.centers[rec.r]) os << ',' << fmt_double(v);
    for (double v : ds.spec.input_grid[rec.j]) os << ',' << fmt_double(v);
    for (std::size_t i = 0; i < n; ++i) os << ',' << fmt_double(next[i]);
    os << '\n';
  };
  for (const auto& rec : ds.records) {
    row(rec, -1, rec.nominal.data());
    for (std::size_t k = 0; k < rec.seeds.size(); ++k)
      row(rec, static_cast<long>(k), rec.replicates.data() + k * n);
  }
}

}  // namespace simgap
