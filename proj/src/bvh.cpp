#include "rigfit/bvh.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

namespace rigfit {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;
constexpr double kRadToDeg = 180.0 / std::numbers::pi;
constexpr int kMaxDepth = 1000;

struct Token {
  std::string_view text;
  int line;
  int column;
};

// Splits on whitespace; braces and ':' are tokens of their own.
std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> tokens;
  int line = 1;
  int column = 1;
  std::size_t i = 0;
  auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\f' || c == '\v'; };
  auto is_single = [](char c) { return c == '{' || c == '}' || c == ':'; };
  while (i < text.size()) {
    const char c = text[i];
    if (c == '\n') {
      ++line;
      column = 1;
      ++i;
      continue;
    }
    if (is_space(c)) {
      ++column;
      ++i;
      continue;
    }
    const std::size_t start = i;
    const int start_column = column;
    if (is_single(c)) {
      ++i;
      ++column;
    } else {
      while (i < text.size() && !is_space(text[i]) && !is_single(text[i])) {
        ++i;
        ++column;
      }
    }
    tokens.push_back({text.substr(start, i - start), line, start_column});
  }
  return tokens;
}

struct RawJoint {
  std::string name;
  int parent;
  Vec3 offset;
  JointChannels channels;
  std::optional<Vec3> end_site;
};

class Parser {
 public:
  explicit Parser(std::string_view text) : tokens_(tokenize(text)) {}

  BvhDocument parse() {
    expect("HIERARCHY");
    const Token& root_kw = next("ROOT");
    if (root_kw.text != "ROOT") {
      fail(root_kw, "expected ROOT, found '" + std::string(root_kw.text) + "'");
    }
    parse_joint(kNoParent, 0);
    if (peek() != nullptr && peek()->text == "ROOT") {
      fail(*peek(), "multiple ROOT hierarchies are not supported");
    }
    if (peek() == nullptr || peek()->text != "MOTION") {
      if (peek() == nullptr) {
        fail_at_end("missing MOTION section");
      }
      fail(*peek(), "expected MOTION, found '" + std::string(peek()->text) + "'");
    }
    ++pos_;
    return parse_motion();
  }

 private:
  [[noreturn]] void fail(const Token& at, const std::string& message) const {
    throw ParseError(message, at.line, at.column);
  }

  [[noreturn]] void fail_at_end(const std::string& message) const {
    if (tokens_.empty()) {
      throw ParseError(message, 1, 1);
    }
    const Token& last = tokens_.back();
    throw ParseError(message, last.line, last.column + static_cast<int>(last.text.size()));
  }

  const Token* peek() const {
    return pos_ < tokens_.size() ? &tokens_[pos_] : nullptr;
  }

  const Token& next(std::string_view expected) {
    if (pos_ >= tokens_.size()) {
      fail_at_end("unexpected end of input, expected '" + std::string(expected) + "'");
    }
    return tokens_[pos_++];
  }

  void expect(std::string_view keyword) {
    const Token& t = next(keyword);
    if (t.text != keyword) {
      fail(t, "unexpected token '" + std::string(t.text) + "', expected '" + std::string(keyword) + "'");
    }
  }

  double number(const Token& t) const {
    double value = 0.0;
    const char* first = t.text.data();
    const char* last = first + t.text.size();
    if (first != last && *first == '+') {
      ++first;
    }
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last || !std::isfinite(value)) {
      fail(t, "non-numeric literal '" + std::string(t.text) + "'");
    }
    return value;
  }

  double next_number() {
    return number(next("number"));
  }

  Vec3 parse_offset() {
    expect("OFFSET");
    Vec3 v;
    v.x() = next_number();
    v.y() = next_number();
    v.z() = next_number();
    return v;
  }

  JointChannels parse_channels() {
    expect("CHANNELS");
    const Token& count_token = next("channel count");
    const double count = number(count_token);
    if (count < 0 || count > 6 || count != std::floor(count)) {
      fail(count_token, "invalid channel count '" + std::string(count_token.text) + "'");
    }
    JointChannels out;
    for (int k = 0; k < static_cast<int>(count); ++k) {
      const Token& t = next("channel name");
      const auto channel = parse_bvh_channel(t.text);
      if (!channel) {
        fail(t, "unknown channel name '" + std::string(t.text) + "'");
      }
      if (std::find(out.channels.begin(), out.channels.end(), *channel) != out.channels.end()) {
        fail(t, "duplicate channel '" + std::string(t.text) + "'");
      }
      out.channels.push_back(*channel);
    }
    const auto rotations = std::count_if(out.channels.begin(), out.channels.end(), [](BvhChannel c) {
      return c >= BvhChannel::Xrotation;
    });
    if (rotations != 0 && rotations != 3) {
      fail(count_token, "a joint needs either zero or three rotation channels");
    }
    return out;
  }

  void parse_joint(int parent, int depth) {
    const Token& name = next("joint name");
    if (depth > kMaxDepth) {
      fail(name, "hierarchy nested deeper than " + std::to_string(kMaxDepth) + " levels");
    }
    if (name.text == "{" || name.text == "}") {
      fail(name, "missing joint name");
    }
    const int index = static_cast<int>(joints_.size());
    joints_.push_back({std::string(name.text), parent, Vec3::Zero(), {}, std::nullopt});
    expect("{");
    joints_[index].offset = parse_offset();
    joints_[index].channels = parse_channels();
    while (true) {
      const Token& t = next("}");
      if (t.text == "}") {
        return;
      }
      if (t.text == "JOINT") {
        parse_joint(index, depth + 1);
      } else if (t.text == "End") {
        expect("Site");
        if (joints_[index].end_site) {
          fail(t, "joint '" + joints_[index].name + "' has more than one End Site");
        }
        expect("{");
        joints_[index].end_site = parse_offset();
        expect("}");
      } else {
        fail(t, "unexpected token '" + std::string(t.text) + "' in joint '" + joints_[index].name + "'");
      }
    }
  }

  BvhDocument parse_motion() {
    expect("Frames");
    expect(":");
    const Token& frames_token = next("frame count");
    const double frames_value = number(frames_token);
    if (frames_value < 0 || frames_value != std::floor(frames_value)) {
      fail(frames_token, "invalid frame count '" + std::string(frames_token.text) + "'");
    }
    const std::size_t frame_count = static_cast<std::size_t>(frames_value);
    expect("Frame");
    expect("Time");
    expect(":");
    const Token& time_token = next("frame time");
    const double frame_time = number(time_token);
    if (!(frame_time > 0.0)) {
      fail(time_token, "frame time must be positive");
    }

    std::size_t arity = 0;
    for (const auto& j : joints_) {
      arity += j.channels.channels.size();
    }

    // Group remaining tokens by line: one motion row per line.
    std::vector<std::vector<double>> rows;
    while (pos_ < tokens_.size()) {
      const int line = tokens_[pos_].line;
      std::vector<double> row;
      const Token& first = tokens_[pos_];
      while (pos_ < tokens_.size() && tokens_[pos_].line == line) {
        row.push_back(number(tokens_[pos_]));
        ++pos_;
      }
      if (row.size() != arity) {
        fail(
            first,
            "motion row on line " + std::to_string(line) + " has " + std::to_string(row.size()) +
                " values, expected " + std::to_string(arity));
      }
      rows.push_back(std::move(row));
    }
    if (rows.size() != frame_count) {
      const Token& at = rows.empty() ? frames_token : tokens_.back();
      fail(
          at,
          "declared " + std::to_string(frame_count) + " frames but found " +
              std::to_string(rows.size()) + " motion rows");
    }
    return build(rows, frame_time);
  }

  BvhDocument build(const std::vector<std::vector<double>>& rows, double frame_time) {
    std::vector<std::string> names;
    std::vector<int> parents;
    Vec3List offsets;
    for (const auto& j : joints_) {
      names.push_back(j.name);
      parents.push_back(j.parent);
      offsets.push_back(j.offset);
    }
    // The hierarchy nests parent before child, so the canonical order is the
    // file order.
    Skeleton skeleton = Skeleton::create(std::move(names), std::move(parents), std::move(offsets));

    const std::size_t n = joints_.size();
    bool child_positions = false;
    for (std::size_t j = 1; j < n; ++j) {
      child_positions = child_positions || joints_[j].channels.has_position();
    }

    BvhDocument doc{
        .skeleton = std::move(skeleton),
        .channels = {},
        .end_sites = {},
        .clip = {},
        .frame_time = frame_time,
        .joint_translations = {},
    };
    for (const auto& j : joints_) {
      doc.channels.push_back(j.channels);
      doc.end_sites.push_back(j.end_site);
    }
    doc.clip.fps = 1.0 / frame_time;
    doc.clip.frames.reserve(rows.size());
    for (const auto& row : rows) {
      Pose pose = Pose::identity(n);
      Vec3List translations;
      if (child_positions) {
        translations = doc.skeleton.offsets();
      }
      std::size_t cursor = 0;
      for (std::size_t j = 0; j < n; ++j) {
        Vec3 position = joints_[j].offset;
        Vec3 angles = Vec3::Zero();
        int rotation_slot = 0;
        for (BvhChannel c : joints_[j].channels.channels) {
          const double value = row[cursor++];
          switch (c) {
            case BvhChannel::Xposition:
              position.x() = value;
              break;
            case BvhChannel::Yposition:
              position.y() = value;
              break;
            case BvhChannel::Zposition:
              position.z() = value;
              break;
            default:
              angles[rotation_slot++] = value * kDegToRad;
              break;
          }
        }
        if (rotation_slot == 3) {
          pose.rotations[j] =
              matrix_to_axis_angle(euler_to_matrix(angles, joints_[j].channels.rotation_order()));
        }
        if (j == 0) {
          pose.root_translation = position;
        } else if (child_positions) {
          translations[j] = position;
        }
      }
      doc.clip.frames.push_back(std::move(pose));
      if (child_positions) {
        doc.joint_translations.push_back(std::move(translations));
      }
    }
    return doc;
  }

  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
  std::vector<RawJoint> joints_;
};

std::string fixed(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", value);
  std::string s(buf);
  if (s == "-0.000000") {
    s = "0.000000";
  }
  return s;
}

void write_vec(std::ostringstream& out, const Vec3& v) {
  out << fixed(v.x()) << ' ' << fixed(v.y()) << ' ' << fixed(v.z());
}

void write_joint(
    std::ostringstream& out,
    const BvhDocument& doc,
    std::size_t joint,
    int depth) {
  const std::string indent(2 * depth, ' ');
  out << indent << (depth == 0 ? "ROOT " : "JOINT ") << doc.skeleton.name(joint) << '\n';
  out << indent << "{\n";
  out << indent << "  OFFSET ";
  write_vec(out, doc.skeleton.offset(joint));
  out << '\n';
  const auto& channels = doc.channels[joint].channels;
  out << indent << "  CHANNELS " << channels.size();
  for (BvhChannel c : channels) {
    out << ' ' << to_string(c);
  }
  out << '\n';
  for (std::size_t child : doc.skeleton.children(joint)) {
    write_joint(out, doc, child, depth + 1);
  }
  if (doc.end_sites[joint]) {
    out << indent << "  End Site\n";
    out << indent << "  {\n";
    out << indent << "    OFFSET ";
    write_vec(out, *doc.end_sites[joint]);
    out << '\n';
    out << indent << "  }\n";
  }
  out << indent << "}\n";
}

} // namespace

std::string_view to_string(BvhChannel channel) {
  switch (channel) {
    case BvhChannel::Xposition:
      return "Xposition";
    case BvhChannel::Yposition:
      return "Yposition";
    case BvhChannel::Zposition:
      return "Zposition";
    case BvhChannel::Xrotation:
      return "Xrotation";
    case BvhChannel::Yrotation:
      return "Yrotation";
    case BvhChannel::Zrotation:
      return "Zrotation";
  }
  return "Xrotation";
}

std::optional<BvhChannel> parse_bvh_channel(std::string_view name) {
  for (BvhChannel c :
       {BvhChannel::Xposition,
        BvhChannel::Yposition,
        BvhChannel::Zposition,
        BvhChannel::Xrotation,
        BvhChannel::Yrotation,
        BvhChannel::Zrotation}) {
    if (to_string(c) == name) {
      return c;
    }
  }
  return std::nullopt;
}

bool JointChannels::has_position() const {
  return std::any_of(channels.begin(), channels.end(), [](BvhChannel c) { return c <= BvhChannel::Zposition; });
}

bool JointChannels::has_rotation() const {
  return std::any_of(channels.begin(), channels.end(), [](BvhChannel c) { return c >= BvhChannel::Xrotation; });
}

EulerOrder JointChannels::rotation_order() const {
  std::string axes;
  for (BvhChannel c : channels) {
    if (c >= BvhChannel::Xrotation) {
      axes += to_string(c)[0];
    }
  }
  return parse_euler_order(axes).value_or(EulerOrder::ZXY);
}

namespace {

std::vector<BvhChannel> rotation_channels(EulerOrder order) {
  std::vector<BvhChannel> out;
  for (int k = 0; k < 3; ++k) {
    out.push_back(static_cast<BvhChannel>(static_cast<int>(BvhChannel::Xrotation) + euler_axis(order, k)));
  }
  return out;
}

} // namespace

JointChannels JointChannels::root(EulerOrder order) {
  JointChannels out{{BvhChannel::Xposition, BvhChannel::Yposition, BvhChannel::Zposition}};
  for (BvhChannel c : rotation_channels(order)) {
    out.channels.push_back(c);
  }
  return out;
}

JointChannels JointChannels::rotation_only(EulerOrder order) {
  return JointChannels{rotation_channels(order)};
}

std::size_t BvhDocument::channel_count() const {
  std::size_t total = 0;
  for (const auto& c : channels) {
    total += c.channels.size();
  }
  return total;
}

BvhDocument make_bvh_document(const Skeleton& skeleton, const AnimationClip& clip) {
  if (!(clip.fps > 0.0)) {
    throw ValidationError("clip fps must be positive");
  }
  BvhDocument doc{
      .skeleton = skeleton,
      .channels = {},
      .end_sites = std::vector<std::optional<Vec3>>(skeleton.size()),
      .clip = clip,
      .frame_time = 1.0 / clip.fps,
      .joint_translations = {},
  };
  for (std::size_t j = 0; j < skeleton.size(); ++j) {
    doc.channels.push_back(j == 0 ? JointChannels::root() : JointChannels::rotation_only());
  }
  return doc;
}

BvhDocument parse_bvh(std::string_view text) {
  return Parser(text).parse();
}

std::string write_bvh(const BvhDocument& doc) {
  const std::size_t n = doc.skeleton.size();
  if (doc.channels.size() != n || doc.end_sites.size() != n) {
    throw ValidationError("BVH document channel/end-site tables do not match the skeleton");
  }
  if (!(doc.frame_time > 0.0)) {
    throw ValidationError("BVH frame time must be positive");
  }
  if (!doc.joint_translations.empty() && doc.joint_translations.size() != doc.clip.frames.size()) {
    throw ValidationError("BVH joint translation table does not match the frame count");
  }
  for (std::size_t t = 0; t < doc.clip.frames.size(); ++t) {
    if (doc.clip.frames[t].rotations.size() != n) {
      throw ValidationError(
          "frame " + std::to_string(t) + " has " + std::to_string(doc.clip.frames[t].rotations.size()) +
          " rotations, skeleton has " + std::to_string(n) + " joints");
    }
  }

  std::ostringstream out;
  out << "HIERARCHY\n";
  write_joint(out, doc, 0, 0);
  out << "MOTION\n";
  out << "Frames: " << doc.clip.frames.size() << '\n';
  char frame_time[64];
  std::snprintf(frame_time, sizeof(frame_time), "%.9g", doc.frame_time);
  out << "Frame Time: " << frame_time << '\n';

  for (std::size_t t = 0; t < doc.clip.frames.size(); ++t) {
    const Pose& pose = doc.clip.frames[t];
    bool first = true;
    for (std::size_t j = 0; j < n; ++j) {
      const JointChannels& jc = doc.channels[j];
      Vec3 position = doc.skeleton.offset(j);
      if (j == 0) {
        position = pose.root_translation;
      } else if (!doc.joint_translations.empty()) {
        position = doc.joint_translations[t].at(j);
      }
      Vec3 angles = Vec3::Zero();
      if (jc.has_rotation()) {
        angles = matrix_to_euler(axis_angle_to_matrix(pose.rotations[j]), jc.rotation_order()) * kRadToDeg;
      }
      int rotation_slot = 0;
      for (BvhChannel c : jc.channels) {
        double value = 0.0;
        switch (c) {
          case BvhChannel::Xposition:
            value = position.x();
            break;
          case BvhChannel::Yposition:
            value = position.y();
            break;
          case BvhChannel::Zposition:
            value = position.z();
            break;
          default:
            value = angles[rotation_slot++];
            break;
        }
        out << (first ? "" : " ") << fixed(value);
        first = false;
      }
    }
    out << '\n';
  }
  return out.str();
}

BvhDocument load_bvh(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open '" + path.string() + "'");
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_bvh(buffer.str());
}

void save_bvh(const std::filesystem::path& path, const BvhDocument& document) {
  const std::string text = write_bvh(document);
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("cannot write '" + path.string() + "'");
  }
  out << text;
  if (!out) {
    throw IoError("failed writing '" + path.string() + "'");
  }
}

} // namespace rigfit
