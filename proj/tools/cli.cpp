#include "cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "CLI11.hpp"
#include "sphconv/bench.hpp"
#include "sphconv/error.hpp"
#include "sphconv/fit.hpp"
#include "sphconv/gradient_table.hpp"
#include "sphconv/lsc.hpp"
#include "sphconv/nifti.hpp"
#include "sphconv/phantom.hpp"

namespace sphconv::cli {

namespace fs = std::filesystem;

namespace {

/// Invalid flag combination or input that does not match the request.
class ValidationError : public Error {
 public:
  using Error::Error;
};

bool is_gz(const fs::path& p) {
  const std::string s = p.string();
  return s.size() >= 3 && s.compare(s.size() - 3, 3, ".gz") == 0;
}

/// Runs `write(tmp)` on a sibling temporary path and renames it onto `target`
/// only on success.
void atomic_write(const fs::path& target, const std::function<void(const fs::path&)>& write) {
  fs::path tmp = target;
  tmp += ".tmp-" + std::to_string(::getpid());
  try {
    write(tmp);
    fs::rename(tmp, target);
  } catch (...) {
    std::error_code ec;
    fs::remove(tmp, ec);
    throw;
  }
}

void write_volume(const fs::path& out, const Array4& data, const Eigen::Matrix4d& affine) {
  atomic_write(out, [&](const fs::path& tmp) {
    write_nifti(tmp, data, affine, {.datatype = NiftiDatatype::Float32, .gzip = is_gz(out)});
  });
}

std::string available_shells(const ShellTable& table) {
  std::ostringstream os;
  for (std::size_t i = 0; i < table.shells.size(); ++i)
    os << (i ? ", " : "") << table.shells[i].nominal_b << " (" << table.shells[i].members.size()
       << " dirs)";
  return table.shells.empty() ? "none" : os.str();
}

/// Requested shells in request order; all shells when none are requested.
std::vector<const Shell*> select_shells(const GradientScheme& scheme,
                                        const std::vector<double>& requested, double tolerance) {
  const ShellTable& table = scheme.shells();
  std::vector<const Shell*> out;
  if (requested.empty()) {
    for (const Shell& s : table.shells) out.push_back(&s);
    if (out.empty()) throw ValidationError("gradient table has no diffusion-weighted shell");
    return out;
  }
  for (double b : requested) {
    const Shell* s = table.find(b, tolerance);
    if (!s) {
      std::ostringstream os;
      os << "no shell with b = " << b << "; available shells: " << available_shells(table);
      throw ValidationError(os.str());
    }
    out.push_back(s);
  }
  return out;
}

/// Splits the 4th axis of an SH image into shells of R coefficients.
ShVolume load_sh(const NiftiImage& img, int order) {
  const ShBasisSpec basis(order);
  const std::size_t vols = img.data.volumes();
  const std::size_t r = basis.coeff_count();
  if (vols == 0 || vols % r != 0)
    throw ValidationError("SH input has " + std::to_string(vols) + " volumes; order " +
                          std::to_string(order) + " expects " + std::to_string(r) +
                          " per shell");
  return ShVolume(to_volume5(img.data), basis, vols / r);
}

struct DirectionSource {
  std::string dirs;
  std::string bvals;
  std::string bvecs;
  std::vector<double> shells;
  double tolerance = kShellTolerance;

  void add_options(CLI::App* app) {
    app->add_option("--dirs", dirs, "Text file with one 'x y z' direction per line");
    app->add_option("--bvals", bvals, "FSL bvals file");
    app->add_option("--bvecs", bvecs, "FSL bvecs file");
    app->add_option("--shell", shells, "Shell b-value(s) to use (repeatable)");
    app->add_option("--shell-tolerance", tolerance, "b-value grouping tolerance (s/mm^2)");
  }

  /// One direction set per shell.
  std::vector<std::vector<Direction>> resolve() const {
    if (!dirs.empty()) {
      if (!bvals.empty() || !bvecs.empty())
        throw ValidationError("--dirs cannot be combined with --bvals/--bvecs");
      return {read_directions(dirs)};
    }
    if (bvals.empty() || bvecs.empty())
      throw ValidationError("directions required: give --dirs or both --bvals and --bvecs");
    const GradientScheme scheme = read_bvals_bvecs(bvals, bvecs, tolerance);
    std::vector<std::vector<Direction>> sets;
    for (const Shell* s : select_shells(scheme, shells, tolerance)) sets.push_back(scheme.directions(*s));
    return sets;
  }
};

struct Signal2ShArgs {
  std::string dwi, bvals, bvecs, out;
  int order = 4;
  double lambda = 0.006;
  std::vector<double> shells;
  double tolerance = kShellTolerance;
};

int cmd_signal2sh(const Signal2ShArgs& a, const ExecPolicy& policy, std::ostream& err) {
  const GradientScheme scheme = read_bvals_bvecs(a.bvals, a.bvecs, a.tolerance);
  const auto selected = select_shells(scheme, a.shells, a.tolerance);
  const NiftiImage img = read_nifti(a.dwi);
  if (img.data.volumes() != scheme.size())
    throw ValidationError("DWI has " + std::to_string(img.data.volumes()) +
                          " volumes but the gradient table has " + std::to_string(scheme.size()) +
                          " entries");

  const NormalizedDwi norm = normalize_b0(img.data, scheme.bvals());
  const DwiVolume dwi = gather_shells(norm, selected);

  std::vector<FitOperator> ops;
  for (const Shell* s : selected) ops.emplace_back(scheme.directions(*s), a.order, a.lambda);
  const ShVolume sh = signal_to_sh(dwi, ops, policy);

  for (std::size_t i = 0; i < ops.size(); ++i)
    err << "shell b=" << selected[i]->nominal_b << ": R=" << ops[i].basis().coeff_count()
        << " condition=" << std::setprecision(6) << ops[i].condition() << "\n";
  const std::size_t excluded = static_cast<std::size_t>(std::count(norm.excluded.begin(), norm.excluded.end(), 1));
  if (excluded) err << excluded << " voxel(s) with vanishing b0 set to 0\n";

  write_volume(a.out, to_array4(sh.data), img.affine);
  return kOk;
}

struct Sh2SignalArgs {
  std::string sh, out;
  int order = 4;
  DirectionSource dirs;
};

int cmd_sh2signal(const Sh2SignalArgs& a, const ExecPolicy& policy) {
  const NiftiImage img = read_nifti(a.sh);
  const ShVolume sh = load_sh(img, a.order);
  auto sets = a.dirs.resolve();
  if (sets.size() == 1 && sh.shells > 1) sets.assign(sh.shells, sets.front());
  if (sets.size() != sh.shells)
    throw ValidationError("SH input holds " + std::to_string(sh.shells) + " shell(s) but " +
                          std::to_string(sets.size()) + " direction set(s) were selected");
  const DwiVolume sig = sh_to_signal(sh, sets, policy);
  write_volume(a.out, to_array4(sig.data), img.affine);
  return kOk;
}

struct LscArgs {
  std::string sh, out, kernel, moving_average;
  int order = 4;
  std::optional<int> order_out;
  std::optional<std::size_t> shells_out;
  double lambda = 0.006;
  DirectionSource dirs;
};

std::pair<int, double> parse_moving_average(const std::string& spec) {
  const auto comma = spec.find(',');
  if (comma == std::string::npos)
    throw ValidationError("--moving-average expects 'n,alpha', got '" + spec + "'");
  try {
    std::size_t used = 0;
    const int n = std::stoi(spec.substr(0, comma), &used);
    if (used != comma) throw std::invalid_argument(spec);
    const std::string tail = spec.substr(comma + 1);
    const double alpha = std::stod(tail, &used);
    if (used != tail.size()) throw std::invalid_argument(spec);
    return {n, alpha};
  } catch (const std::logic_error&) {
    throw ValidationError("--moving-average expects 'n,alpha', got '" + spec + "'");
  }
}

bool same_directions(const std::vector<Direction>& a, const std::vector<Direction>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if ((a[i].vec() - b[i].vec()).norm() > 1e-9) return false;
  return true;
}

int cmd_lsc(const LscArgs& a, const ExecPolicy& policy) {
  if (a.kernel.empty() == a.moving_average.empty())
    throw ValidationError("give exactly one of --kernel or --moving-average");

  const NiftiImage img = read_nifti(a.sh);
  const ShVolume sh = load_sh(img, a.order);
  const auto sets = a.dirs.resolve();
  for (const auto& s : sets)
    if (!same_directions(s, sets.front()))
      throw ValidationError("local spherical convolution needs one gradient set shared by all shells");

  std::optional<KernelDocument> doc;
  if (!a.kernel.empty()) {
    doc = read_kernel_json(a.kernel);
  } else {
    const auto [n, alpha] = parse_moving_average(a.moving_average);
    const std::vector<int> sizes{n};
    doc = KernelDocument{make_moving_average_kernel(sizes, sh.shells, a.shells_out.value_or(sh.shells)),
                         sizes, alpha};
  }
  if (doc->kernel.shells_in() != sh.shells)
    throw ValidationError("kernel expects " + std::to_string(doc->kernel.shells_in()) +
                          " input shell(s); SH input holds " + std::to_string(sh.shells));

  const LscGeometry geom = build_lsc_geometry(sets.front(), doc->kernel_sizes, doc->angular_distance,
                                              a.order, a.order_out.value_or(a.order), a.lambda);
  if (geom.kernel_length() != doc->kernel.length())
    throw ValidationError("kernel length K=" + std::to_string(doc->kernel.length()) +
                          " does not match geometry K=" + std::to_string(geom.kernel_length()));

  const ShVolume out = lsc_forward(sh, doc->kernel, geom, policy);
  write_volume(a.out, to_array4(out.data), img.affine);
  return kOk;
}

struct BenchArgs {
  BenchOptions options;
  std::string out;
};

int cmd_bench(BenchArgs a, int threads, std::ostream& out) {
  a.options.threads = threads;
  const BenchReport report = run_bench(a.options);
  if (a.out.empty()) {
    report.write_csv(out);
  } else {
    atomic_write(a.out, [&](const fs::path& tmp) {
      std::ofstream f(tmp);
      if (!f) throw IoError("cannot write " + tmp.string());
      report.write_csv(f);
      if (!f) throw IoError("cannot write " + tmp.string());
    });
  }
  return kOk;
}

struct PhantomArgs {
  std::string prefix;
  std::vector<std::size_t> dims{4, 4, 4};
  std::string generator = "bandlimited";
  int order = 4;
  std::uint64_t seed = 1;
  std::size_t directions = 30;
  std::vector<double> bvalues{1000.0};
  std::size_t b0_count = 1;
  double noise = 0.0;
  double b0_signal = 1000.0;
};

int cmd_phantom(const PhantomArgs& a, std::ostream& err) {
  if (a.dims.size() != 3) throw ValidationError("--dims expects three values");
  PhantomSpec spec;
  spec.dims = {a.dims[0], a.dims[1], a.dims[2]};
  spec.b0_signal = a.b0_signal;
  spec.noise_sigma = a.noise;
  spec.noise_seed = a.seed;
  if (a.generator == "constant")
    spec.generator = ConstantSignal{};
  else if (a.generator == "bandlimited")
    spec.generator = BandLimitedSignal{.order = a.order, .seed = a.seed, .mean = 0.6, .contrast = 0.5};
  else if (a.generator == "tensor")
    spec.generator = TensorSignal{};
  else
    throw ValidationError("unknown generator '" + a.generator + "' (constant, bandlimited, tensor)");

  if (!verify_direction_sets()) {
    err << "error: built-in direction tables failed the rank self-test\n";
    return kNumerical;
  }
  const auto dirs = repulsion_directions(a.directions);
  const GradientScheme scheme = make_scheme(dirs, a.bvalues, a.b0_count);
  write_phantom(make_phantom(spec, scheme), a.prefix);
  return kOk;
}

int exit_code_for(const NiftiError& e) {
  switch (e.kind()) {
    case NiftiError::Kind::Io:
    case NiftiError::Kind::Truncated: return kIo;
    default: return kUsage;
  }
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Spherical-harmonic transforms and local spherical convolution for diffusion MRI"};
  app.require_subcommand(1);
  int threads = 1;
  app.add_option("--threads", threads, "Worker threads for voxel loops (output does not depend on it)")
      ->check(CLI::PositiveNumber);

  Signal2ShArgs s2sh;
  auto* c_s2sh = app.add_subcommand("signal2sh", "Fit SH coefficients to b0-normalized DWI data");
  c_s2sh->add_option("--dwi", s2sh.dwi, "4D DWI NIfTI")->required();
  c_s2sh->add_option("--bvals", s2sh.bvals, "FSL bvals file")->required();
  c_s2sh->add_option("--bvecs", s2sh.bvecs, "FSL bvecs file")->required();
  c_s2sh->add_option("--order", s2sh.order, "Even SH order")->capture_default_str();
  c_s2sh->add_option("--lambda", s2sh.lambda, "Laplace-Beltrami weight")->capture_default_str();
  c_s2sh->add_option("--shell", s2sh.shells, "Shell b-value(s) to fit (default: all)");
  c_s2sh->add_option("--shell-tolerance", s2sh.tolerance, "b-value grouping tolerance");
  c_s2sh->add_option("--out", s2sh.out, "Output SH NIfTI")->required();

  Sh2SignalArgs sh2s;
  auto* c_sh2s = app.add_subcommand("sh2signal", "Evaluate SH coefficients at directions");
  c_sh2s->add_option("--sh", sh2s.sh, "SH coefficient NIfTI")->required();
  c_sh2s->add_option("--order", sh2s.order, "Even SH order of the input")->capture_default_str();
  c_sh2s->add_option("--out", sh2s.out, "Output signal NIfTI")->required();
  sh2s.dirs.add_options(c_sh2s);

  LscArgs lsc;
  auto* c_lsc = app.add_subcommand("lsc", "Local spherical convolution of an SH volume");
  c_lsc->add_option("--sh", lsc.sh, "SH coefficient NIfTI")->required();
  c_lsc->add_option("--kernel", lsc.kernel, "Kernel JSON file");
  c_lsc->add_option("--moving-average", lsc.moving_average, "Single-ring moving average 'n,alpha' (radians)");
  c_lsc->add_option("--order", lsc.order, "Even SH order of the input")->capture_default_str();
  c_lsc->add_option("--order-out", lsc.order_out, "Even SH order of the output (default: --order)");
  c_lsc->add_option("--shells-out", lsc.shells_out, "Output shells for --moving-average (default: input shells)");
  c_lsc->add_option("--lambda", lsc.lambda, "Laplace-Beltrami weight of the refit")->capture_default_str();
  c_lsc->add_option("--out", lsc.out, "Output SH NIfTI")->required();
  lsc.dirs.add_options(c_lsc);

  BenchArgs bench;
  auto* c_bench = app.add_subcommand("bench", "Batched vs naive per-voxel transform timings (CSV)");
  c_bench->add_option("--orders", bench.options.orders, "SH orders")->delimiter(',')->capture_default_str();
  c_bench->add_option("--voxels", bench.options.voxel_count, "Voxel count")->capture_default_str();
  c_bench->add_option("--repeats", bench.options.repeats, "Timed repeats (median reported, >= 3)")->capture_default_str();
  c_bench->add_option("--seed", bench.options.seed, "Synthetic data seed")->capture_default_str();
  c_bench->add_option("--directions", bench.options.directions, "Direction set size (30, 60, 90)")->capture_default_str();
  c_bench->add_option("--lambda", bench.options.lambda, "Laplace-Beltrami weight")->capture_default_str();
  c_bench->add_option("--out", bench.out, "CSV path (default: stdout)");

  PhantomArgs ph;
  auto* c_ph = app.add_subcommand("phantom", "Write a synthetic acquisition (NIfTI + bvals/bvecs)");
  c_ph->add_option("--out-prefix", ph.prefix, "Output prefix")->required();
  c_ph->add_option("--dims", ph.dims, "Grid size x,y,z")->delimiter(',')->expected(3);
  c_ph->add_option("--generator", ph.generator, "constant | bandlimited | tensor")->capture_default_str();
  c_ph->add_option("--order", ph.order, "Order of band-limited signals")->capture_default_str();
  c_ph->add_option("--seed", ph.seed, "Random seed")->capture_default_str();
  c_ph->add_option("--directions", ph.directions, "Directions per shell (30, 60, 90)")->capture_default_str();
  c_ph->add_option("--bvalues", ph.bvalues, "Shell b-values")->delimiter(',');
  c_ph->add_option("--b0-count", ph.b0_count, "Number of b0 volumes")->capture_default_str();
  c_ph->add_option("--noise", ph.noise, "Gaussian noise sigma on raw values")->capture_default_str();
  c_ph->add_option("--b0-signal", ph.b0_signal, "Raw b0 intensity")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }

  const ExecPolicy policy{threads};
  try {
    if (c_s2sh->parsed()) return cmd_signal2sh(s2sh, policy, err);
    if (c_sh2s->parsed()) return cmd_sh2signal(sh2s, policy);
    if (c_lsc->parsed()) return cmd_lsc(lsc, policy);
    if (c_bench->parsed()) return cmd_bench(bench, threads, out);
    if (c_ph->parsed()) return cmd_phantom(ph, err);
  } catch (const IllPosedFit& e) {
    err << "error: " << e.what() << "\n";
    return kNumerical;
  } catch (const NiftiError& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kIo;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kIo;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}

}  // namespace sphconv::cli
