#include "spectgnn/scene_io.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include "spectgnn/errors.hpp"

namespace spectgnn {
namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(trim(cur));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

double parse_double(const std::string& s, std::size_t line, const char* what) {
  if (s.empty()) throw ParseError(std::string("empty ") + what, line);
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || errno == ERANGE) {
    throw ParseError(std::string("invalid ") + what + " '" + s + "'", line);
  }
  return v;
}

std::int64_t parse_int(const std::string& s, std::size_t line, const char* what) {
  if (s.empty()) throw ParseError(std::string("empty ") + what, line);
  errno = 0;
  char* end = nullptr;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (end != s.c_str() + s.size() || errno == ERANGE) {
    throw ParseError(std::string("invalid ") + what + " '" + s + "'", line);
  }
  return v;
}

std::size_t parse_count(const std::string& s, std::size_t line, const char* what) {
  const std::int64_t v = parse_int(s, line, what);
  if (v < 1) throw ParseError(std::string(what) + " must be at least 1", line);
  return static_cast<std::size_t>(v);
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// PNM header tokens, skipping '#' comments.
std::string pnm_token(const std::string& buf, std::size_t& pos) {
  while (pos < buf.size()) {
    if (buf[pos] == '#') {
      while (pos < buf.size() && buf[pos] != '\n') ++pos;
    } else if (std::isspace(static_cast<unsigned char>(buf[pos]))) {
      ++pos;
    } else {
      break;
    }
  }
  std::size_t start = pos;
  while (pos < buf.size() && !std::isspace(static_cast<unsigned char>(buf[pos])) && buf[pos] != '#') ++pos;
  return buf.substr(start, pos - start);
}

Raster read_pgm(const fs::path& path) {
  const std::string buf = read_file(path);
  std::size_t pos = 0;
  const std::string magic = pnm_token(buf, pos);
  if (magic != "P2" && magic != "P5") throw DataError("'" + path.string() + "' is not a PGM file");
  auto header_int = [&](const char* what) {
    const std::string tok = pnm_token(buf, pos);
    char* end = nullptr;
    const long v = std::strtol(tok.c_str(), &end, 10);
    if (tok.empty() || end != tok.c_str() + tok.size() || v <= 0) {
      throw DataError("'" + path.string() + "': bad PGM " + what);
    }
    return static_cast<std::size_t>(v);
  };
  Raster r;
  r.width = header_int("width");
  r.height = header_int("height");
  const std::size_t maxval = header_int("maxval");
  if (maxval > 65535) throw DataError("'" + path.string() + "': PGM maxval above 65535");
  const std::size_t count = r.width * r.height;
  r.pixels.resize(count);
  if (magic == "P2") {
    for (std::size_t i = 0; i < count; ++i) {
      const std::string tok = pnm_token(buf, pos);
      if (tok.empty()) throw DataError("'" + path.string() + "': truncated PGM data");
      r.pixels[i] = static_cast<double>(std::strtol(tok.c_str(), nullptr, 10)) / static_cast<double>(maxval);
    }
    return r;
  }
  ++pos;  // single whitespace after maxval
  const std::size_t bytes = maxval > 255 ? 2 : 1;
  if (buf.size() < pos + count * bytes) throw DataError("'" + path.string() + "': truncated PGM data");
  const auto* p = reinterpret_cast<const unsigned char*>(buf.data() + pos);
  for (std::size_t i = 0; i < count; ++i) {
    const unsigned v = bytes == 2 ? (unsigned{p[2 * i]} << 8) | p[2 * i + 1] : p[i];
    r.pixels[i] = static_cast<double>(v) / static_cast<double>(maxval);
  }
  return r;
}

Raster read_png(const fs::path& path) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.string().c_str())) {
    throw DataError("'" + path.string() + "': " + img.message);
  }
  img.format = PNG_FORMAT_RGB;
  std::vector<unsigned char> buf(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
    const std::string msg = img.message;
    png_image_free(&img);
    throw DataError("'" + path.string() + "': " + msg);
  }
  Raster r;
  r.width = img.width;
  r.height = img.height;
  r.pixels.resize(r.width * r.height);
  for (std::size_t i = 0; i < r.pixels.size(); ++i) {
    const double sum = buf[3 * i] + buf[3 * i + 1] + buf[3 * i + 2];
    r.pixels[i] = sum / (3.0 * 255.0);
  }
  return r;
}

}  // namespace

Raster read_image(const fs::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".png") return read_png(path);
  return read_pgm(path);
}

void write_pgm(const Raster& image, const fs::path& path) {
  if (image.pixels.size() != image.width * image.height || image.width == 0 || image.height == 0) {
    throw DataError("write_pgm: raster size does not match its pixel count");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << "P5\n" << image.width << ' ' << image.height << "\n255\n";
  std::string data(image.pixels.size(), '\0');
  for (std::size_t i = 0; i < image.pixels.size(); ++i) {
    const double v = std::clamp(image.pixels[i], 0.0, 1.0);
    data[i] = static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0)));
  }
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

SceneWindow parse_scene_text(const std::string& text, const fs::path& base_dir, bool load_image) {
  SceneWindow scene;
  std::istringstream in(text);
  std::string raw;
  std::size_t lineno = 0;
  bool have_hist = false, have_fut = false, in_rows = false;
  struct Row {
    std::int64_t frame;
    Point2 p;
    std::size_t line;
  };
  std::vector<std::int64_t> order;
  std::map<std::int64_t, std::vector<Row>> rows;

  while (std::getline(in, raw)) {
    ++lineno;
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    if (!in_rows) {
      if (line == "agent_id,frame,x,y") {
        in_rows = true;
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw ParseError("expected key=value or the column header", lineno);
      const std::string key = trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));
      if (key == "scene_id") {
        scene.scene_id = value;
      } else if (key == "t_hist") {
        scene.t_hist = parse_count(value, lineno, "t_hist");
        have_hist = true;
      } else if (key == "t_fut") {
        scene.t_fut = parse_count(value, lineno, "t_fut");
        have_fut = true;
      } else if (key == "frame_period") {
        scene.frame_period = parse_double(value, lineno, "frame_period");
        if (!(scene.frame_period > 0.0)) throw ParseError("frame_period must be positive", lineno);
      } else if (key == "image") {
        scene.image_path = value;
      } else if (key == "affine") {
        const auto parts = split(value, ',');
        if (parts.size() != 6) throw ParseError("affine needs 6 comma-separated values", lineno);
        for (std::size_t i = 0; i < 6; ++i) {
          scene.image_transform.m[i] = parse_double(parts[i], lineno, "affine coefficient");
        }
      } else {
        throw ParseError("unknown header key '" + key + "'", lineno);
      }
      continue;
    }
    const auto cells = split(line, ',');
    if (cells.size() != 4) {
      throw ParseError("expected 4 columns, found " + std::to_string(cells.size()), lineno);
    }
    const std::int64_t id = parse_int(cells[0], lineno, "agent_id");
    Row r{parse_int(cells[1], lineno, "frame"),
          {parse_double(cells[2], lineno, "x"), parse_double(cells[3], lineno, "y")},
          lineno};
    if (!std::isfinite(r.p.x) || !std::isfinite(r.p.y)) {
      throw ParseError("non-finite position for agent " + std::to_string(id), lineno);
    }
    auto [it, fresh] = rows.try_emplace(id);
    if (fresh) order.push_back(id);
    it->second.push_back(r);
  }
  if (!in_rows) throw ParseError("missing column header 'agent_id,frame,x,y'", lineno);
  if (!have_hist || !have_fut) throw ParseError("header must declare t_hist and t_fut", lineno);
  if (order.empty()) throw DataError("scene '" + scene.scene_id + "' has no agents");

  std::int64_t first = rows.at(order.front()).front().frame;
  for (const auto& [id, rs] : rows) {
    for (const Row& r : rs) first = std::min(first, r.frame);
  }
  const std::size_t th = scene.t_hist, tf = scene.t_fut;
  std::size_t span = 0;
  for (const std::int64_t id : order) {
    auto& rs = rows.at(id);
    std::stable_sort(rs.begin(), rs.end(), [](const Row& a, const Row& b) { return a.frame < b.frame; });
    for (std::size_t i = 1; i < rs.size(); ++i) {
      if (rs[i].frame == rs[i - 1].frame) {
        throw ParseError("duplicate frame " + std::to_string(rs[i].frame) + " for agent " + std::to_string(id),
                         std::max(rs[i].line, rs[i - 1].line));
      }
    }
    std::int64_t expect = first;
    for (const Row& r : rs) {
      if (r.frame != expect) {
        throw DataError("scene '" + scene.scene_id + "': agent " + std::to_string(id) + " is missing frames " +
                        std::to_string(expect) + ".." + std::to_string(r.frame - 1));
      }
      ++expect;
    }
    const std::size_t have = rs.size();
    const std::size_t want = span ? span : (have > th ? th + tf : th);
    if (have != want) {
      throw DataError("scene '" + scene.scene_id + "': agent " + std::to_string(id) + " is missing frames " +
                      std::to_string(first + static_cast<std::int64_t>(have)) + ".." +
                      std::to_string(first + static_cast<std::int64_t>(want) - 1));
    }
    span = want;
  }
  if (span != th && span != th + tf) {
    throw DataError("scene '" + scene.scene_id + "': agents cover " + std::to_string(span) +
                    " frames; expected " + std::to_string(th) + " or " + std::to_string(th + tf));
  }
  const std::size_t n = order.size();
  scene.agent_ids = order;
  scene.history.resize(th * n);
  if (span == th + tf) scene.future.resize(tf * n);
  for (std::size_t a = 0; a < n; ++a) {
    const auto& rs = rows.at(order[a]);
    for (std::size_t t = 0; t < th; ++t) scene.hist(t, a) = rs[t].p;
    for (std::size_t t = 0; t < scene.future.size() / n; ++t) scene.fut(t, a) = rs[th + t].p;
  }
  if (load_image && !scene.image_path.empty()) scene.image = read_image(base_dir / scene.image_path);
  scene.validate();
  return scene;
}

SceneWindow parse_scene(const fs::path& path, bool load_image) {
  const std::string text = read_file(path);
  try {
    return parse_scene_text(text, path.parent_path(), load_image);
  } catch (const ParseError& e) {
    std::string msg = e.what();
    msg = msg.substr(msg.find(": ") + 2);
    throw ParseError(path.string() + ": " + msg, e.line());
  }
}

std::string format_scene(const SceneWindow& scene, const std::string& image_ref) {
  scene.validate();
  std::ostringstream out;
  out << "scene_id=" << scene.scene_id << '\n'
      << "t_hist=" << scene.t_hist << '\n'
      << "t_fut=" << scene.t_fut << '\n'
      << "frame_period=" << fmt17(scene.frame_period) << '\n';
  if (!image_ref.empty()) {
    out << "image=" << image_ref << '\n' << "affine=";
    for (std::size_t i = 0; i < 6; ++i) out << (i ? "," : "") << fmt17(scene.image_transform.m[i]);
    out << '\n';
  }
  out << "agent_id,frame,x,y\n";
  const std::size_t n = scene.num_agents();
  const std::size_t steps = scene.t_hist + (scene.has_future() ? scene.t_fut : 0);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t t = 0; t < steps; ++t) {
      const Point2& p = t < scene.t_hist ? scene.hist(t, a) : scene.fut(t - scene.t_hist, a);
      out << scene.agent_ids[a] << ',' << t << ',' << fmt17(p.x) << ',' << fmt17(p.y) << '\n';
    }
  }
  return out.str();
}

void write_scene(const SceneWindow& scene, const fs::path& path) {
  std::string ref;
  if (scene.image) {
    ref = path.stem().string() + ".pgm";
    write_pgm(*scene.image, path.parent_path() / ref);
  }
  const std::string text = format_scene(scene, ref);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

std::vector<SceneWindow> load_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("dataset directory '" + dir.string() + "' does not exist");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".scene") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DataError("no .scene files in '" + dir.string() + "'");
  std::vector<SceneWindow> scenes;
  scenes.reserve(files.size());
  for (const auto& f : files) scenes.push_back(parse_scene(f));
  return scenes;
}

void save_dataset(const std::vector<SceneWindow>& scenes, const fs::path& dir) {
  fs::create_directories(dir);
  for (const SceneWindow& s : scenes) {
    if (s.scene_id.empty() || s.scene_id.find_first_of("/\\") != std::string::npos) {
      throw DataError("scene id '" + s.scene_id + "' cannot be used as a file name");
    }
    write_scene(s, dir / (s.scene_id + ".scene"));
  }
}

}  // namespace spectgnn
