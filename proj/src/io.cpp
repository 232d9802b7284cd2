#include "advdo/io.hpp"

#include <json.hpp>

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace advdo::io {

namespace fs = std::filesystem;
using nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

// Strict reader over a parsed document; every failure names the field path.
class Node {
 public:
  Node(const json& j, std::string path, const std::string& source) : j_(j), path_(std::move(path)), src_(source) {}

  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError(src_ + ": " + (path_.empty() ? "<root>" : path_) + ": " + msg);
  }

  const std::string& path() const { return path_; }

  void object(std::initializer_list<const char*> allowed) const {
    if (!j_.is_object()) fail("expected an object");
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!ok.count(it.key())) Node(j_, child(it.key()), src_).fail("unknown field");
  }

  bool has(const char* key) const { return j_.contains(key); }

  Node at(const char* key) const {
    if (!j_.contains(key)) fail(std::string("missing field '") + key + "'");
    return Node(j_.at(key), child(key), src_);
  }

  std::size_t size() const {
    if (!j_.is_array()) fail("expected an array");
    return j_.size();
  }
  Node operator[](std::size_t i) const { return Node(j_.at(i), path_ + "[" + std::to_string(i) + "]", src_); }

  double number() const {
    if (!j_.is_number()) fail(j_.is_null() ? "null is not a number (NaN is not allowed)" : "expected a number");
    const double v = j_.get<double>();
    if (!std::isfinite(v)) fail("non-finite number");
    return v;
  }
  int integer() const {
    if (!j_.is_number_integer()) fail("expected an integer");
    return j_.get<int>();
  }
  std::string str() const {
    if (!j_.is_string()) fail("expected a string");
    return j_.get<std::string>();
  }
  Vec2 point() const {
    if (size() != 2) fail("expected [x, y]");
    return {(*this)[0].number(), (*this)[1].number()};
  }
  Path path_value() const {
    Path p;
    const std::size_t n = size();
    for (std::size_t i = 0; i < n; ++i) p.push_back((*this)[i].point());
    return p;
  }
  void format(const char* expected) const {
    const std::string f = at("format").str();
    if (f != expected) at("format").fail("unsupported format '" + f + "' (expected " + expected + ")");
  }

 private:
  std::string child(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  const json& j_;
  std::string path_;
  const std::string& src_;
};

json parse_document(const std::string& text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ParseError(source + ":" + std::to_string(line) + ":" + std::to_string(col) + ": invalid JSON: " +
                     e.what());
  }
}

ojson point_json(const Vec2& p) { return ojson::array({p.x(), p.y()}); }
ojson path_json(const Path& p) {
  ojson a = ojson::array();
  for (const auto& v : p) a.push_back(point_json(v));
  return a;
}
ojson footprint_json(const Footprint& f) { return ojson{{"length", f.length}, {"width", f.width}}; }

Footprint read_footprint(const Node& n) {
  n.object({"length", "width"});
  Footprint f{n.at("length").number(), n.at("width").number()};
  if (!(f.length > 0) || !(f.width > 0)) n.fail("footprint dimensions must be > 0");
  return f;
}

int index_of(const std::vector<std::string>& ids, const Node& n) {
  const std::string id = n.str();
  for (std::size_t i = 0; i < ids.size(); ++i)
    if (ids[i] == id) return static_cast<int>(i);
  n.fail("unknown agent id '" + id + "'");
}

void unique_ids(const std::vector<std::string>& ids, const Node& agents) {
  std::set<std::string> seen;
  for (std::size_t i = 0; i < ids.size(); ++i)
    if (!seen.insert(ids[i]).second) agents[i].at("id").fail("duplicate agent id '" + ids[i] + "'");
}

// Validation failures of a decoded structure, reported against its field path.
template <class F>
void checked(const Node& n, F&& f) {
  try {
    f();
  } catch (const InvalidInput& e) {
    n.fail(e.what());
  }
}

}  // namespace

// Files ----------------------------------------------------------------------

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path + ": cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  const fs::path tmp = p.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(path + ": cannot write file");
    out << text;
    if (!out) throw Error(path + ": write failed");
  }
  fs::rename(tmp, p);
}

std::string resolve(const std::string& file, const std::string& ref) {
  const fs::path r(ref);
  if (r.is_absolute()) return ref;
  return (fs::path(file).parent_path() / r).lexically_normal().string();
}

// Scenario -------------------------------------------------------------------

void ScenarioFile::validate() const {
  if (!(dt > 0) || !std::isfinite(dt)) throw InvalidInput("dt must be > 0");
  if (history < 2) throw InvalidInput("history H = " + std::to_string(history) + " violates H >= 2");
  if (horizon < 1) throw InvalidInput("horizon T must be >= 1");
  if (names.size() != scenes.size()) throw InvalidInput("one name per scene required");
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const Scene& s = scenes[i];
    const std::string at = "scene '" + names[i] + "': ";
    if (s.dt != dt) throw InvalidInput(at + "dt differs from the file dt");
    if (s.horizon != horizon) throw InvalidInput(at + "horizon differs from the file horizon");
    if (static_cast<int>(s.history_length()) != history)
      throw InvalidInput(at + "history length differs from the file history");
    try {
      s.validate();
    } catch (const InvalidInput& e) {
      throw InvalidInput(at + e.what());
    }
    std::set<std::string> seen(s.ids.begin(), s.ids.end());
    if (seen.size() != s.ids.size()) throw InvalidInput(at + "agent ids are not unique");
  }
}

std::string to_json(const ScenarioFile& f) {
  ojson doc;
  doc["format"] = kScenarioFormat;
  doc["dt"] = f.dt;
  doc["history"] = f.history;
  doc["horizon"] = f.horizon;
  doc["map"] = f.map;
  ojson scenes = ojson::array();
  for (std::size_t i = 0; i < f.scenes.size(); ++i) {
    const Scene& s = f.scenes[i];
    auto id = [&](std::size_t a) { return a < s.ids.size() ? s.ids[a] : "agent" + std::to_string(a); };
    ojson sc;
    sc["id"] = i < f.names.size() ? f.names[i] : std::to_string(i);
    sc["adv"] = id(static_cast<std::size_t>(s.adv));
    if (s.ego >= 0) sc["ego"] = id(static_cast<std::size_t>(s.ego));
    ojson agents = ojson::array();
    for (std::size_t a = 0; a < s.agents(); ++a) {
      ojson ag;
      ag["id"] = id(a);
      ag["footprint"] = footprint_json(s.footprint(a));
      ag["history"] = path_json(s.histories[a]);
      if (s.has_futures()) ag["future"] = path_json(s.futures[a]);
      agents.push_back(std::move(ag));
    }
    sc["agents"] = std::move(agents);
    scenes.push_back(std::move(sc));
  }
  doc["scenes"] = std::move(scenes);
  return doc.dump(1) + "\n";
}

ScenarioFile parse_scenario(const std::string& text, const std::string& source) {
  const json doc = parse_document(text, source);
  const Node root(doc, "", source);
  root.object({"format", "dt", "history", "horizon", "map", "scenes"});
  root.format(kScenarioFormat);
  ScenarioFile f;
  f.dt = root.at("dt").number();
  if (!(f.dt > 0)) root.at("dt").fail("dt must be > 0");
  f.history = root.at("history").integer();
  if (f.history < 2) root.at("history").fail("H = " + std::to_string(f.history) + " violates H >= 2");
  f.horizon = root.at("horizon").integer();
  if (f.horizon < 1) root.at("horizon").fail("T = " + std::to_string(f.horizon) + " violates T >= 1");
  if (root.has("map")) f.map = root.at("map").str();
  const Node scenes = root.at("scenes");
  std::set<std::string> names;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const Node sn = scenes[i];
    sn.object({"id", "adv", "ego", "agents"});
    const std::string name = sn.at("id").str();
    if (!names.insert(name).second) sn.at("id").fail("duplicate scene id '" + name + "'");
    Scene s;
    s.dt = f.dt;
    s.horizon = f.horizon;
    s.map_ref = f.map;
    const Node agents = sn.at("agents");
    const std::size_t n = agents.size();
    if (n == 0) agents.fail("no agents");
    bool any_future = false, all_future = true;
    for (std::size_t a = 0; a < n; ++a) {
      const Node an = agents[a];
      an.object({"id", "footprint", "history", "future"});
      s.ids.push_back(an.at("id").str());
      s.footprints.push_back(an.has("footprint") ? read_footprint(an.at("footprint")) : Footprint{});
      Path h = an.at("history").path_value();
      if (static_cast<int>(h.size()) != f.history)
        an.at("history").fail(std::to_string(h.size()) + " points, file declares H = " + std::to_string(f.history));
      s.histories.push_back(std::move(h));
      if (an.has("future")) {
        Path fu = an.at("future").path_value();
        if (static_cast<int>(fu.size()) != f.horizon)
          an.at("future").fail(std::to_string(fu.size()) + " points, file declares T = " +
                               std::to_string(f.horizon));
        s.futures.push_back(std::move(fu));
        any_future = true;
      } else {
        all_future = false;
      }
    }
    if (any_future && !all_future) agents.fail("futures must be given for every agent or none");
    unique_ids(s.ids, agents);
    s.adv = index_of(s.ids, sn.at("adv"));
    s.ego = sn.has("ego") ? index_of(s.ids, sn.at("ego")) : -1;
    checked(sn, [&] { s.validate(); });
    f.names.push_back(name);
    f.scenes.push_back(std::move(s));
  }
  return f;
}

ScenarioFile load_scenario(const std::string& path) {
  ScenarioFile f = parse_scenario(read_text(path), path);
  if (!f.map.empty()) {
    const std::string m = resolve(path, f.map);
    if (!fs::exists(m)) throw ParseError(path + ": map: referenced map '" + f.map + "' does not exist");
  }
  return f;
}

void save_scenario(const ScenarioFile& f, const std::string& path) {
  f.validate();
  write_text(path, to_json(f));
}

// Map ------------------------------------------------------------------------

std::string to_json(const MapModel& m) {
  ojson doc;
  doc["format"] = kMapFormat;
  doc["id"] = m.id;
  ojson polys = ojson::array();
  for (const auto& p : m.drivable) polys.push_back(path_json(p));
  doc["drivable"] = std::move(polys);
  ojson lanes = ojson::array();
  for (const auto& l : m.lanes)
    lanes.push_back(ojson{{"id", l.id}, {"width", l.width}, {"centerline", path_json(l.centerline.points)}});
  doc["lanes"] = std::move(lanes);
  return doc.dump(1) + "\n";
}

MapModel parse_map(const std::string& text, const std::string& source) {
  const json doc = parse_document(text, source);
  const Node root(doc, "", source);
  root.object({"format", "id", "drivable", "lanes"});
  root.format(kMapFormat);
  MapModel m;
  m.id = root.at("id").str();
  const Node polys = root.at("drivable");
  for (std::size_t i = 0; i < polys.size(); ++i) {
    geom::Polygon p = polys[i].path_value();
    if (p.size() < 3) polys[i].fail("polygon needs >= 3 vertices");
    if (!geom::is_simple(p)) polys[i].fail("polygon is not simple");
    m.drivable.push_back(std::move(p));
  }
  if (root.has("lanes")) {
    const Node lanes = root.at("lanes");
    std::set<std::string> ids;
    for (std::size_t i = 0; i < lanes.size(); ++i) {
      const Node ln = lanes[i];
      ln.object({"id", "width", "centerline"});
      Lane l{ln.at("id").str(), geom::Polyline(), 3.5};
      if (!ids.insert(l.id).second) ln.at("id").fail("duplicate lane id '" + l.id + "'");
      if (ln.has("width")) l.width = ln.at("width").number();
      Path c = ln.at("centerline").path_value();
      if (c.size() < 2) ln.at("centerline").fail("centerline needs >= 2 points");
      l.centerline = geom::Polyline(std::move(c));
      m.lanes.push_back(std::move(l));
    }
  }
  checked(root, [&] { m.validate(); });
  return m;
}

MapModel load_map(const std::string& path) { return parse_map(read_text(path), path); }

void save_map(const MapModel& m, const std::string& path) {
  m.validate();
  write_text(path, to_json(m));
}

// Episodes -------------------------------------------------------------------

void EpisodeFile::validate() const {
  std::set<std::string> seen;
  for (const auto& e : episodes) {
    if (!seen.insert(e.id).second) throw InvalidInput("duplicate episode id '" + e.id + "'");
    try {
      e.validate();
    } catch (const InvalidInput& ex) {
      throw InvalidInput("episode '" + e.id + "': " + ex.what());
    }
  }
}

std::string to_json(const EpisodeFile& f) {
  ojson doc;
  doc["format"] = kEpisodesFormat;
  doc["map"] = f.map;
  ojson eps = ojson::array();
  for (const auto& e : f.episodes) {
    auto id = [&](std::size_t a) { return a < e.ids.size() ? e.ids[a] : "agent" + std::to_string(a); };
    ojson ej;
    ej["id"] = e.id;
    ej["dt"] = e.dt;
    ej["history"] = e.history;
    ej["start"] = e.start;
    ej["ego"] = id(static_cast<std::size_t>(e.ego));
    ej["adv"] = id(static_cast<std::size_t>(e.adv));
    if (e.target_speed >= 0) ej["target_speed"] = e.target_speed;
    ojson agents = ojson::array();
    for (std::size_t a = 0; a < e.agents(); ++a)
      agents.push_back(ojson{{"id", id(a)}, {"footprint", footprint_json(e.footprint(a))}, {"log", path_json(e.logs[a])}});
    ej["agents"] = std::move(agents);
    eps.push_back(std::move(ej));
  }
  doc["episodes"] = std::move(eps);
  return doc.dump(1) + "\n";
}

EpisodeFile parse_episodes(const std::string& text, const std::string& source) {
  const json doc = parse_document(text, source);
  const Node root(doc, "", source);
  root.object({"format", "map", "episodes"});
  root.format(kEpisodesFormat);
  EpisodeFile f;
  if (root.has("map")) f.map = root.at("map").str();
  const Node eps = root.at("episodes");
  std::set<std::string> names;
  for (std::size_t i = 0; i < eps.size(); ++i) {
    const Node en = eps[i];
    en.object({"id", "dt", "history", "start", "ego", "adv", "target_speed", "agents"});
    planning::Episode e;
    e.id = en.at("id").str();
    if (!names.insert(e.id).second) en.at("id").fail("duplicate episode id '" + e.id + "'");
    e.dt = en.at("dt").number();
    e.history = en.at("history").integer();
    if (e.history < 2) en.at("history").fail("H = " + std::to_string(e.history) + " violates H >= 2");
    e.start = en.at("start").integer();
    if (en.has("target_speed")) e.target_speed = en.at("target_speed").number();
    e.map_ref = f.map;
    const Node agents = en.at("agents");
    for (std::size_t a = 0; a < agents.size(); ++a) {
      const Node an = agents[a];
      an.object({"id", "footprint", "log"});
      e.ids.push_back(an.at("id").str());
      e.footprints.push_back(an.has("footprint") ? read_footprint(an.at("footprint")) : Footprint{});
      e.logs.push_back(an.at("log").path_value());
    }
    unique_ids(e.ids, agents);
    e.ego = index_of(e.ids, en.at("ego"));
    e.adv = index_of(e.ids, en.at("adv"));
    checked(en, [&] { e.validate(); });
    f.episodes.push_back(std::move(e));
  }
  return f;
}

EpisodeFile load_episodes(const std::string& path) {
  EpisodeFile f = parse_episodes(read_text(path), path);
  if (!f.map.empty() && !fs::exists(resolve(path, f.map)))
    throw ParseError(path + ": map: referenced map '" + f.map + "' does not exist");
  return f;
}

void save_episodes(const EpisodeFile& f, const std::string& path) {
  f.validate();
  write_text(path, to_json(f));
}

// Dense sidecar --------------------------------------------------------------

namespace {

constexpr char kDenseMagic[8] = {'A', 'D', 'V', 'D', 'O', 'D', 'N', 'S'};
constexpr std::uint32_t kDenseVersion = 1;

static_assert(std::endian::native == std::endian::little, "dense sidecar assumes a little-endian host");

template <class T>
void put(std::string& out, T v) {
  char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  out.append(b, sizeof(T));
}

class Cursor {
 public:
  Cursor(const std::string& b, std::size_t pos, const std::string& src) : b_(b), src_(src), pos_(pos) {}
  template <class T>
  T get() {
    if (pos_ + sizeof(T) > b_.size()) throw ParseError(src_ + ": truncated dense sidecar at byte " + std::to_string(pos_));
    T v;
    std::memcpy(&v, b_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  double finite() {
    const double v = get<double>();
    if (!std::isfinite(v)) throw ParseError(src_ + ": non-finite value at byte " + std::to_string(pos_ - 8));
    return v;
  }
  bool done() const { return pos_ == b_.size(); }
  const std::string& source() const { return src_; }

 private:
  const std::string& b_;
  const std::string& src_;
  std::size_t pos_;
};

}  // namespace

std::string encode_dense(const std::vector<recon::DenseTrajectory>& trajs) {
  std::string out(kDenseMagic, sizeof(kDenseMagic));
  put<std::uint32_t>(out, kDenseVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(trajs.size()));
  for (const auto& d : trajs) {
    put<std::int32_t>(out, d.factor);
    put<double>(out, d.controls.dt);
    put<double>(out, d.start.position.x());
    put<double>(out, d.start.position.y());
    put<double>(out, d.start.heading);
    put<double>(out, d.start.speed);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(d.controls.size()));
    for (const auto& c : d.controls.actions) {
      put<double>(out, c.accel);
      put<double>(out, c.curvature);
    }
    put<std::uint32_t>(out, static_cast<std::uint32_t>(d.positions.size()));
    for (const auto& p : d.positions) {
      put<double>(out, p.x());
      put<double>(out, p.y());
    }
  }
  return out;
}

std::vector<recon::DenseTrajectory> decode_dense(const std::string& bytes, const std::string& source) {
  if (bytes.size() < sizeof(kDenseMagic) || std::memcmp(bytes.data(), kDenseMagic, sizeof(kDenseMagic)) != 0)
    throw ParseError(source + ": not a dense trajectory sidecar");
  Cursor c(bytes, sizeof(kDenseMagic), source);
  const auto version = c.get<std::uint32_t>();
  if (version != kDenseVersion) throw ParseError(source + ": unsupported sidecar version " + std::to_string(version));
  const auto n = c.get<std::uint32_t>();
  std::vector<recon::DenseTrajectory> out;
  for (std::uint32_t i = 0; i < n; ++i) {
    recon::DenseTrajectory d;
    d.factor = c.get<std::int32_t>();
    if (d.factor < 1) throw ParseError(source + ": trajectory " + std::to_string(i) + ": factor must be >= 1");
    d.controls.dt = c.finite();
    d.start.position.x() = c.finite();
    d.start.position.y() = c.finite();
    d.start.heading = c.finite();
    d.start.speed = c.finite();
    const auto nc = c.get<std::uint32_t>();
    for (std::uint32_t k = 0; k < nc; ++k) {
      const double a = c.finite();
      d.controls.actions.push_back({a, c.finite()});
    }
    const auto np = c.get<std::uint32_t>();
    for (std::uint32_t k = 0; k < np; ++k) {
      const double x = c.finite();
      d.positions.emplace_back(x, c.finite());
    }
    out.push_back(std::move(d));
  }
  if (!c.done()) throw ParseError(source + ": trailing bytes after " + std::to_string(n) + " trajectories");
  return out;
}

void save_dense(const std::vector<recon::DenseTrajectory>& trajs, const std::string& path) {
  write_text(path, encode_dense(trajs));
}

std::vector<recon::DenseTrajectory> load_dense(const std::string& path) {
  return decode_dense(read_text(path), path);
}

}  // namespace advdo::io
