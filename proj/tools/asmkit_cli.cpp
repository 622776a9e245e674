// asmkit command-line driver.
//
//   asmkit gen-data  --out data.asmdata
//   asmkit build-asm --input data.asmdata|pts_dir --out model.asmmodel
//   asmkit smooth    --model model.asmmodel --input shapes --out smoothed
//   asmkit train     --data data.asmdata [--model model.asmmodel] --out run/
//   asmkit eval      --weights run/weights.asmreg --data data.asmdata --out eval/
//   asmkit gradcheck
//
// Exit codes: 0 success, 1 usage or configuration error, 2 data or I/O error.

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "asmkit/config.hpp"
#include "asmkit/dataset_io.hpp"
#include "asmkit/pts.hpp"
#include "asmkit/shape_model.hpp"
#include "asmkit/trainer.hpp"

namespace fs = std::filesystem;
using namespace asmkit;

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kData = 2;

// Raised for failures that belong in the data/IO bucket regardless of type.
struct DataError : Error {
  using Error::Error;
};

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> sets;

  std::string input;
  std::string model;
  std::string data;
  std::string weights;
  std::optional<double> variance_fraction;
  std::optional<std::size_t> components;
  std::string mode;
  std::string loss;
  std::optional<std::size_t> epochs;
  bool record_time = false;
  bool gt_as_pred = false;
  std::string split = "test";
};

RunConfig effective_config(const Options& o) {
  RunConfig c;
  if (!o.config_path.empty()) {
    std::string body;
    try {
      body = text::read_file(o.config_path);
    } catch (const IoError& e) {
      throw InvalidConfig(e.what());
    }
    try {
      c = parse_config(body);
    } catch (const InvalidConfig& e) {
      throw InvalidConfig(o.config_path + ": " + e.what());
    }
  }
  for (const auto& s : o.sets) {
    const auto eq = s.find('=');
    const auto dot = s.find('.');
    if (eq == std::string::npos) throw InvalidConfig("--set expects section.key=value, got '" + s + "'");
    const bool has_section = dot != std::string::npos && dot < eq;
    const std::string section = has_section ? s.substr(0, dot) : "";
    const std::string key = s.substr(has_section ? dot + 1 : 0, eq - (has_section ? dot + 1 : 0));
    set_config_value(c, section, text::trim(key), text::trim(std::string_view(s).substr(eq + 1)));
  }
  if (o.seed) c.seed = *o.seed;
  if (o.variance_fraction) {
    c.variance_fraction = *o.variance_fraction;
    c.components = 0;
  }
  if (o.components) c.components = *o.components;
  if (!o.mode.empty()) c.mode = parse_frame_mode(o.mode);
  if (!o.loss.empty()) c.loss = parse_loss_kind(o.loss);
  if (o.epochs) c.optimizer.epochs = *o.epochs;
  return c;
}

std::string echo(const RunConfig& c, std::string_view command) {
  std::string block = "asmkit " + std::string(command) + "\n" + config_to_text(c);
  std::cout << text::comment_block(block);
  return block;
}

void require_out(const Options& o) {
  if (o.out.empty()) throw InvalidConfig("--out is required");
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
}

Dataset read_dataset(const std::string& path) {
  try {
    return load_dataset(path);
  } catch (const FormatError& e) {
    throw DataError(path + ": " + e.what());
  }
}

ShapeModel read_model(const std::string& path) {
  try {
    return deserialize_model(text::read_file(path));
  } catch (const FormatError& e) {
    throw DataError(path + ": " + e.what());
  }
}

std::vector<fs::path> pts_files(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".pts") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

PtsRecord read_pts(const fs::path& path) {
  try {
    return parse_pts(text::read_file(path.string()));
  } catch (const FormatError& e) {
    throw DataError(path.string() + ": " + e.what());
  } catch (const Error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

double mean_point_distance(const Shape& a, const Shape& b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.n_points(); ++i) {
    const auto p = a.point(i), q = b.point(i);
    const double dx = p.x - q.x, dy = p.y - q.y;
    sum += std::sqrt(dx * dx + dy * dy);
  }
  return sum / static_cast<double>(a.n_points());
}

// ---------------------------------------------------------------------------

int cmd_gen_data(const Options& o) {
  const auto c = effective_config(o);
  const auto block = echo(c, "gen-data");
  require_out(o);
  const auto sc = c.synthetic_config();
  sc.validate();
  const auto data = generate_synthetic(sc);
  save_dataset(data, o.out, block);
  std::cout << "n_points " << data.n_points << "\n";
  std::cout << "train " << data.count(Split::train) << "\n";
  std::cout << "test " << data.count(Split::test) << "\n";
  return kOk;
}

int cmd_build_asm(const Options& o) {
  const auto c = effective_config(o);
  const auto block = echo(c, "build-asm");
  require_out(o);
  if (o.input.empty()) throw InvalidConfig("--input is required");

  std::vector<Shape> shapes;
  if (fs::is_directory(o.input)) {
    for (const auto& f : pts_files(o.input)) shapes.push_back(read_pts(f).shape);
    if (shapes.empty()) throw InsufficientData("no .pts files in " + o.input);
    for (std::size_t i = 1; i < shapes.size(); ++i) {
      if (shapes[i].n_points() != shapes[0].n_points()) {
        throw DataError("shapes in " + o.input + " have differing point counts (" + std::to_string(shapes[0].n_points()) +
                        " and " + std::to_string(shapes[i].n_points()) + ")");
      }
    }
  } else {
    const auto data = read_dataset(o.input);
    for (const auto* r : data.split(Split::train)) shapes.push_back(r->gt_shape);
  }

  const auto model = build_shape_model(shapes, c.retention(), c.mode);
  double sq = 0.0;
  for (const auto& s : shapes) {
    Shape frame = s;
    if (model.mode == FrameMode::aligned) frame = similarity_fit(s, model.mean_shape()).apply(s);
    sq += squared_distance(frame, reconstruct(model, project(model, frame)));
  }
  const double rms = std::sqrt(sq / static_cast<double>(shapes.size() * 2 * model.n_points()));

  text::write_file(o.out, serialize_model(model, block));
  std::cout << "shapes " << shapes.size() << "\n";
  std::cout << "components " << model.t() << "\n";
  std::cout << "retained_fraction " << text::format_double(model.retained_fraction()) << "\n";
  std::cout << "reconstruction_rms " << text::format_double(rms) << "\n";
  return kOk;
}

int cmd_smooth(const Options& o) {
  const auto c = effective_config(o);
  const auto block = echo(c, "smooth");
  require_out(o);
  if (o.model.empty() || o.input.empty()) throw InvalidConfig("--model and --input are required");
  const auto model = read_model(o.model);

  auto check_n = [&](std::size_t n, const std::string& what) {
    if (n != model.n_points()) {
      throw ShapeMismatch("model has " + std::to_string(model.n_points()) + " points but " + what + " has " +
                          std::to_string(n));
    }
  };

  double displacement = 0.0;
  std::size_t count = 0;
  auto smooth_one = [&](const Shape& s) {
    const auto out = asm_transform(model, s);
    displacement += mean_point_distance(s, out);
    ++count;
    return out;
  };

  const fs::path input(o.input);
  if (fs::is_directory(input)) {
    const auto files = pts_files(input);
    std::vector<std::pair<fs::path, PtsRecord>> records;
    for (const auto& f : files) {
      auto r = read_pts(f);
      check_n(r.n_points(), f.string());
      records.emplace_back(f, std::move(r));
    }
    ensure_dir(o.out);
    for (auto& [f, r] : records) {
      r.shape = smooth_one(r.shape);
      text::write_file((fs::path(o.out) / f.filename()).string(), write_pts(r));
    }
  } else if (input.extension() == ".pts") {
    auto r = read_pts(input);
    check_n(r.n_points(), o.input);
    r.shape = smooth_one(r.shape);
    text::write_file(o.out, write_pts(r));
  } else {
    auto data = read_dataset(o.input);
    check_n(data.n_points, o.input);
    for (auto& r : data.records) r.gt_shape = smooth_one(r.gt_shape);
    save_dataset(data, o.out, block);
  }
  std::cout << "shapes " << count << "\n";
  std::cout << "mean_displacement " << text::format_double(count ? displacement / static_cast<double>(count) : 0.0)
            << "\n";
  return kOk;
}

void print_report(const EvalReport& r) {
  std::cout << "nme_percent " << text::format_double(r.mean_nme_percent) << "\n";
  std::cout << "failure_rate_percent " << text::format_double(r.failure_rate_percent) << "\n";
  std::cout << "auc " << text::format_double(r.auc) << "\n";
  std::cout << "mae_yaw " << text::format_double(r.pose.yaw) << "\n";
  std::cout << "mae_pitch " << text::format_double(r.pose.pitch) << "\n";
  std::cout << "mae_roll " << text::format_double(r.pose.roll) << "\n";
  if (r.degenerate > 0) std::cout << "degenerate_samples " << r.degenerate << "\n";
}

int cmd_train(const Options& o) {
  const auto c = effective_config(o);
  const auto block = echo(c, "train");
  require_out(o);
  if (o.data.empty()) throw InvalidConfig("--data is required");
  const auto data = read_dataset(o.data);

  ShapeModel model;
  if (!o.model.empty()) {
    model = read_model(o.model);
  } else {
    std::vector<Shape> shapes;
    for (const auto* r : data.split(Split::train)) shapes.push_back(r->gt_shape);
    model = build_shape_model(shapes, c.retention(), c.mode);
  }

  const RegressorConfig rc{data.n_points, c.hidden_widths};
  const auto eval = c.eval_config(data.n_points);
  eval.validate(data.n_points);
  TrainOptions opts;
  opts.loss = c.loss;
  opts.eval = eval;
  const auto [reg, history] = train(data, model, rc, c.optimizer, c.weights, c.seed, opts);

  ensure_dir(o.out);
  const fs::path dir(o.out);
  text::write_file((dir / "weights.asmreg").string(), serialize_regressor(reg, block));
  text::write_file((dir / "history.csv").string(), history_csv(history, o.record_time, block));

  const auto test = data.split(Split::test);
  if (!test.empty()) {
    const auto report = evaluate_regressor(reg, test, eval);
    text::write_file((dir / "report.csv").string(), report_csv(report, block));
    text::write_file((dir / "ced.csv").string(), ced_csv(report.ced, block));
    print_report(report);
  }
  std::cout << "epochs " << history.epochs.size() << "\n";
  std::cout << "smoothed_shapes " << history.smoothed_shapes << "\n";
  if (!history.epochs.empty()) {
    std::cout << "final_l_total " << text::format_double(history.epochs.back().train.l_total) << "\n";
  }
  return kOk;
}

int cmd_eval(const Options& o) {
  const auto c = effective_config(o);
  const auto block = echo(c, "eval");
  require_out(o);
  if (o.data.empty()) throw InvalidConfig("--data is required");
  if (o.weights.empty() && !o.gt_as_pred) throw InvalidConfig("--weights is required");
  if (o.split != "test" && o.split != "train") throw InvalidConfig("--split must be train or test");
  const auto data = read_dataset(o.data);
  const auto records = data.split(o.split == "test" ? Split::test : Split::train);
  const auto eval = c.eval_config(data.n_points);
  eval.validate(data.n_points);

  EvalReport report;
  if (o.gt_as_pred) {
    std::vector<Shape> gt;
    std::vector<PoseTriple> pose;
    for (const auto* r : records) {
      gt.push_back(r->gt_shape);
      pose.push_back(r->pose);
    }
    report = evaluate(gt, gt, pose, pose, eval);
  } else {
    Regressor reg;
    try {
      reg = deserialize_regressor(text::read_file(o.weights));
    } catch (const FormatError& e) {
      throw DataError(o.weights + ": " + e.what());
    }
    if (reg.config().n_points != data.n_points) {
      throw ShapeMismatch("weights expect " + std::to_string(reg.config().n_points) + " points but data has " +
                          std::to_string(data.n_points));
    }
    report = evaluate_regressor(reg, records, eval);
  }

  ensure_dir(o.out);
  text::write_file((fs::path(o.out) / "report.csv").string(), report_csv(report, block));
  text::write_file((fs::path(o.out) / "ced.csv").string(), ced_csv(report.ced, block));
  print_report(report);
  return kOk;
}

int cmd_gradcheck(const Options& o) {
  const auto c = effective_config(o);
  echo(c, "gradcheck");
  struct Case {
    const char* name;
    GradientCheckOptions opts;
  };
  std::vector<Case> cases(3);
  cases[0].name = "default";
  cases[1].name = "alpha0";
  cases[1].opts.alpha = 0.0;
  cases[2].name = "w_pose0";
  cases[2].opts.weights.w_pose = 0.0;
  bool ok = true;
  for (const auto& k : cases) {
    const auto r = gradient_check(k.opts, c.seed);
    const bool pass = r.max_relative_error < 1e-4;
    ok = ok && pass;
    std::cout << k.name << " max_relative_error " << text::format_double(r.max_relative_error) << " parameters "
              << r.parameters << (pass ? " ok" : " FAILED") << "\n";
  }
  return ok ? kOk : kUsage;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Active shape model assisted landmark regression toolkit"};
  app.require_subcommand(1);
  Options o;
  app.add_option("--config", o.config_path, "Configuration file")->check(CLI::ExistingFile);
  app.add_option("--seed", o.seed, "Seed (overrides the config)");
  app.add_option("--out", o.out, "Output file or directory");
  app.add_option("--set", o.sets, "Override one config key: section.key=value");

  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic ASMDATA dataset");
  auto* build = app.add_subcommand("build-asm", "Build a shape model from .pts files or an ASMDATA train split");
  build->add_option("--input", o.input, "Directory of .pts files or ASMDATA file")->required();
  build->add_option("--variance-fraction", o.variance_fraction, "Retained variance fraction");
  build->add_option("--components", o.components, "Retained component count (overrides the fraction)");
  build->add_option("--mode", o.mode, "raw or aligned");
  auto* smooth = app.add_subcommand("smooth", "Apply the ASM operator to shapes");
  smooth->add_option("--model", o.model, "ASMMODEL file")->required();
  smooth->add_option("--input", o.input, ".pts file, directory of .pts files, or ASMDATA file")->required();
  auto* trn = app.add_subcommand("train", "Train the landmark and pose regressor");
  trn->add_option("--data", o.data, "ASMDATA file")->required();
  trn->add_option("--model", o.model, "ASMMODEL file (built from the train split when omitted)");
  trn->add_option("--loss", o.loss, "asm or mse");
  trn->add_option("--epochs", o.epochs, "Epoch count");
  trn->add_option("--variance-fraction", o.variance_fraction, "Retained variance fraction when building the model");
  trn->add_option("--components", o.components, "Retained component count when building the model");
  trn->add_flag("--record-time", o.record_time, "Write wall-clock seconds into the history CSV");
  auto* ev = app.add_subcommand("eval", "Evaluate a trained regressor");
  ev->add_option("--weights", o.weights, "ASMREG file");
  ev->add_option("--data", o.data, "ASMDATA file")->required();
  ev->add_option("--split", o.split, "train or test (default test)");
  ev->add_flag("--gt-as-pred", o.gt_as_pred, "Use ground truth as the prediction (debug)");
  auto* grad = app.add_subcommand("gradcheck", "Finite-difference check of the analytic gradients");

  for (auto* sub : {gen, build, smooth, trn, ev, grad}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*gen) return cmd_gen_data(o);
    if (*build) return cmd_build_asm(o);
    if (*smooth) return cmd_smooth(o);
    if (*trn) return cmd_train(o);
    if (*ev) return cmd_eval(o);
    if (*grad) return cmd_gradcheck(o);
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  }
  return kUsage;
}
