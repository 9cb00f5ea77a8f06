#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "tasnn/io.hpp"

namespace tasnn {

namespace {

void put_u16(std::string& buf, std::uint16_t v) {
  buf.push_back(static_cast<char>(v & 0xff));
  buf.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& buf, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

struct ByteReader {
  const std::string& buf;
  std::size_t pos = 0;

  void need(std::size_t n, const char* what) const {
    if (pos + n > buf.size()) {
      throw ParseError(std::string("evt1: truncated ") + what +
                       " at byte offset " + std::to_string(pos));
    }
  }
  std::uint16_t u16() {
    need(2, "field");
    std::uint16_t v = 0;
    for (int i = 0; i < 2; ++i)
      v |= static_cast<std::uint16_t>(
          static_cast<unsigned char>(buf[pos + i]) << (8 * i));
    pos += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4, "field");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(
               static_cast<unsigned char>(buf[pos + i]))
           << (8 * i);
    pos += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8, "field");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(
               static_cast<unsigned char>(buf[pos + i]))
           << (8 * i);
    pos += 8;
    return v;
  }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

EventStream read_evt1(const std::string& path) {
  const std::string buf = slurp(path);
  ByteReader r{buf};
  r.need(4, "magic");
  if (buf.compare(0, 4, "EVT1") != 0) {
    throw ParseError("evt1: bad magic at byte offset 0 in " + path);
  }
  r.pos = 4;
  EventStream s;
  s.width = r.u32();
  s.height = r.u32();
  const std::uint32_t pol = r.u32();
  r.u32();  // reserved
  if (pol != 1 && pol != 2) {
    throw ParseError("evt1: n_polarities " + std::to_string(pol) +
                     " at byte offset 12");
  }
  s.n_polarities = static_cast<std::uint8_t>(pol);
  const std::uint64_t count = r.u64();
  if (buf.size() - r.pos < count * 10) {
    throw ParseError("evt1: count " + std::to_string(count) + " but only " +
                     std::to_string((buf.size() - r.pos) / 10) +
                     " records present (truncated at byte offset " +
                     std::to_string(buf.size()) + ")");
  }
  if (buf.size() - r.pos > count * 10) {
    throw ParseError("evt1: trailing bytes after " + std::to_string(count) +
                     " records at byte offset " +
                     std::to_string(r.pos + count * 10));
  }
  s.events.reserve(count);
  std::uint32_t prev_t = 0;
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::size_t off = r.pos;
    Event e;
    e.t_us = r.u32();
    e.x = r.u16();
    e.y = r.u16();
    r.need(2, "record tail");
    e.p = static_cast<std::int8_t>(buf[r.pos]);
    r.pos += 2;
    if (e.p != 1 && e.p != -1) {
      throw ParseError("evt1: polarity " + std::to_string(int(e.p)) +
                       " at byte offset " + std::to_string(off + 8));
    }
    if (e.x >= s.width || e.y >= s.height) {
      throw ParseError("evt1: coordinates out of range at byte offset " +
                       std::to_string(off + 4));
    }
    if (i > 0 && e.t_us < prev_t) {
      throw ParseError("evt1: events out of time order at byte offset " +
                       std::to_string(off));
    }
    prev_t = e.t_us;
    s.events.push_back(e);
  }
  s.duration_us = s.events.empty()
                      ? 0
                      : static_cast<std::uint64_t>(s.events.back().t_us) + 1;
  s.validate();
  return s;
}

void write_evt1(const EventStream& s, const std::string& path) {
  std::string buf;
  buf.reserve(28 + s.events.size() * 10);
  buf += "EVT1";
  put_u32(buf, s.width);
  put_u32(buf, s.height);
  put_u32(buf, s.n_polarities);
  put_u32(buf, 0);
  put_u64(buf, s.events.size());
  for (const Event& e : s.events) {
    put_u32(buf, e.t_us);
    put_u16(buf, e.x);
    put_u16(buf, e.y);
    buf.push_back(static_cast<char>(e.p));
    buf.push_back(0);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("write failed for " + path);
}

EventStream read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  EventStream s;
  bool have_meta = false;
  std::string line;
  std::size_t lineno = 0;

  if (!std::getline(in, line)) throw ParseError("csv: empty file " + path);
  ++lineno;
  if (!line.empty() && line[0] == '#') {
    // "# width=W height=H n_polarities=P duration_us=D"
    std::istringstream ls(line.substr(1));
    std::string kv;
    while (ls >> kv) {
      const std::size_t eq = kv.find('=');
      if (eq == std::string::npos) {
        throw ParseError("csv: bad metadata at line 1");
      }
      const std::string key = kv.substr(0, eq);
      const std::string val = kv.substr(eq + 1);
      try {
        if (key == "width")
          s.width = static_cast<std::uint32_t>(std::stoul(val));
        else if (key == "height")
          s.height = static_cast<std::uint32_t>(std::stoul(val));
        else if (key == "n_polarities")
          s.n_polarities = static_cast<std::uint8_t>(std::stoul(val));
        else if (key == "duration_us")
          s.duration_us = std::stoull(val);
        else
          throw ParseError("csv: unknown metadata key '" + key +
                           "' at line 1");
      } catch (const std::invalid_argument&) {
        throw ParseError("csv: bad metadata value at line 1");
      }
    }
    have_meta = true;
    if (!std::getline(in, line)) throw ParseError("csv: missing header line");
    ++lineno;
  }
  if (line != "t_us,x,y,p") {
    throw ParseError("csv: expected header 't_us,x,y,p' at line " +
                     std::to_string(lineno));
  }

  std::uint32_t prev_t = 0;
  std::uint32_t max_x = 0, max_y = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    long long vals[4];
    std::size_t field = 0, start = 0;
    const std::string where = " at line " + std::to_string(lineno);
    for (std::size_t i = 0; i <= line.size(); ++i) {
      if (i == line.size() || line[i] == ',') {
        if (field >= 4) throw ParseError("csv: too many fields" + where);
        try {
          std::size_t used = 0;
          vals[field] = std::stoll(line.substr(start, i - start), &used);
          if (used != i - start) throw std::invalid_argument("");
        } catch (const std::exception&) {
          throw ParseError("csv: bad number" + where);
        }
        ++field;
        start = i + 1;
      }
    }
    if (field != 4) throw ParseError("csv: expected 4 fields" + where);
    if (vals[3] != 1 && vals[3] != -1) {
      throw ParseError("csv: polarity must be 1 or -1" + where);
    }
    if (vals[0] < 0 || vals[1] < 0 || vals[2] < 0 ||
        vals[0] > static_cast<long long>(UINT32_MAX) || vals[1] > 0xffff ||
        vals[2] > 0xffff) {
      throw ParseError("csv: field out of range" + where);
    }
    Event e;
    e.t_us = static_cast<std::uint32_t>(vals[0]);
    e.x = static_cast<std::uint16_t>(vals[1]);
    e.y = static_cast<std::uint16_t>(vals[2]);
    e.p = static_cast<std::int8_t>(vals[3]);
    if (!s.events.empty() && e.t_us < prev_t) {
      throw ParseError("csv: events out of time order" + where);
    }
    prev_t = e.t_us;
    max_x = std::max<std::uint32_t>(max_x, e.x);
    max_y = std::max<std::uint32_t>(max_y, e.y);
    s.events.push_back(e);
  }
  if (!have_meta) {
    s.width = max_x + 1;
    s.height = max_y + 1;
    s.n_polarities = 2;
    s.duration_us =
        s.events.empty() ? 0
                         : static_cast<std::uint64_t>(s.events.back().t_us) + 1;
  }
  s.validate();
  return s;
}

void write_csv(const EventStream& s, const std::string& path) {
  std::ostringstream out;
  out << "# width=" << s.width << " height=" << s.height
      << " n_polarities=" << int(s.n_polarities)
      << " duration_us=" << s.duration_us << "\n";
  out << "t_us,x,y,p\n";
  for (const Event& e : s.events) {
    out << e.t_us << "," << e.x << "," << e.y << "," << int(e.p) << "\n";
  }
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot write " + path);
  f << out.str();
  if (!f) throw IoError("write failed for " + path);
}

}  // namespace

EventStream read_events(const std::string& path, EventFormat format) {
  return format == EventFormat::Evt1 ? read_evt1(path) : read_csv(path);
}

void write_events(const EventStream& stream, const std::string& path,
                  EventFormat format) {
  stream.validate();
  if (format == EventFormat::Evt1) {
    write_evt1(stream, path);
  } else {
    write_csv(stream, path);
  }
}

EventFormat format_from_path(const std::string& path) {
  if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".csv") == 0) {
    return EventFormat::Csv;
  }
  return EventFormat::Evt1;
}

void write_dataset_dir(const Dataset& train, const Dataset& test,
                       const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir);

  nlohmann::json meta;
  meta["width"] = train.width;
  meta["height"] = train.height;
  meta["n_polarities"] = train.n_polarities;
  meta["classes"] = train.classes;
  meta["count"] = train.samples.size() + test.samples.size();
  {
    std::ofstream out(dir + "/dataset.json", std::ios::trunc);
    if (!out) throw IoError("cannot write " + dir + "/dataset.json");
    out << meta.dump(2) << "\n";
  }

  // evt1 has no end-of-stream marker, so the sample duration lives here
  std::ofstream index(dir + "/index.csv", std::ios::trunc);
  if (!index) throw IoError("cannot write " + dir + "/index.csv");
  index << "file,label,split,duration_us\n";
  std::size_t serial = 0;
  for (const auto& [set, split] :
       {std::pair<const Dataset*, const char*>{&train, "train"},
        std::pair<const Dataset*, const char*>{&test, "test"}}) {
    for (const Sample& s : set->samples) {
      char name[32];
      std::snprintf(name, sizeof name, "sample_%05zu.evt1", serial++);
      write_events(s.stream, dir + "/" + name, EventFormat::Evt1);
      index << name << "," << s.label << "," << split << ","
            << s.stream.duration_us << "\n";
    }
  }
  if (!index) throw IoError("write failed for " + dir + "/index.csv");
}

Dataset load_dataset_dir(const std::string& dir, SplitSel split) {
  std::ifstream meta_in(dir + "/dataset.json");
  if (!meta_in) throw IoError("cannot open " + dir + "/dataset.json");
  nlohmann::json meta;
  try {
    meta_in >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(dir + "/dataset.json: " + e.what());
  }
  Dataset out;
  try {
    out.width = meta.at("width").get<std::uint32_t>();
    out.height = meta.at("height").get<std::uint32_t>();
    out.n_polarities = meta.at("n_polarities").get<std::uint8_t>();
    out.classes = meta.at("classes").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(dir + "/dataset.json: " + e.what());
  }

  std::ifstream index(dir + "/index.csv");
  if (!index) throw IoError("cannot open " + dir + "/index.csv");
  std::string line;
  if (!std::getline(index, line) || line != "file,label,split,duration_us") {
    throw ParseError(dir +
                     "/index.csv: expected header 'file,label,split,duration_us'");
  }
  std::size_t lineno = 1;
  while (std::getline(index, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
      if (i == line.size() || line[i] == ',') {
        fields.push_back(line.substr(start, i - start));
        start = i + 1;
      }
    }
    if (fields.size() != 4) {
      throw ParseError(dir + "/index.csv: bad row at line " +
                       std::to_string(lineno));
    }
    const std::string& file = fields[0];
    const std::string& split_s = fields[2];
    if (split_s != "train" && split_s != "test") {
      throw ParseError(dir + "/index.csv: split '" + split_s + "' at line " +
                       std::to_string(lineno));
    }
    if (split == SplitSel::Train && split_s != "train") continue;
    if (split == SplitSel::Test && split_s != "test") continue;
    Sample s;
    try {
      s.label = std::stoi(fields[1]);
      s.stream = read_events(dir + "/" + file, EventFormat::Evt1);
      s.stream.duration_us = std::stoull(fields[3]);
    } catch (const std::invalid_argument&) {
      throw ParseError(dir + "/index.csv: bad number at line " +
                       std::to_string(lineno));
    }
    s.stream.validate();
    if (s.stream.width != out.width || s.stream.height != out.height) {
      throw DataError(file + ": geometry differs from dataset.json");
    }
    out.samples.push_back(std::move(s));
  }
  return out;
}

}  // namespace tasnn
