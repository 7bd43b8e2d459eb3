#include "trex/snapshot.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace trex {

namespace {

constexpr char kMagic[4] = {'T', 'R', 'X', 'S'};
constexpr std::uint32_t kVersion = 1;

enum SectionId : std::uint32_t {
  kSecTimetable = 1,
  kSecTransfers = 2,
  kSecPartition = 3,
  kSecRanks = 4,
  kSecOverlays = 5,
  kSecSuccessor = 6,
};

std::uint64_t fnv1a(const std::uint8_t* data, std::size_t n) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= data[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

struct Writer {
  std::vector<std::uint8_t>& buf;

  void u8(std::uint8_t v) { buf.push_back(v); }
  void u16(std::uint16_t v) {
    for (int i = 0; i < 2; ++i) buf.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    buf.insert(buf.end(), s.begin(), s.end());
  }
  template <typename T, typename F>
  void vec(const std::vector<T>& v, F&& item) {
    u64(v.size());
    for (const T& x : v) item(x);
  }
};

struct Reader {
  const std::uint8_t* data;
  std::size_t size;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (pos + n > size) throw std::runtime_error("snapshot truncated");
  }
  std::uint8_t u8() {
    need(1);
    return data[pos++];
  }
  std::uint16_t u16() {
    need(2);
    std::uint16_t v = 0;
    for (int i = 0; i < 2; ++i) v |= static_cast<std::uint16_t>(data[pos++]) << (8 * i);
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data[pos++]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data[pos++]) << (8 * i);
    return v;
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    std::uint32_t n = u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(data + pos), n);
    pos += n;
    return s;
  }
  template <typename T, typename F>
  std::vector<T> vec(F&& item) {
    std::uint64_t n = u64();
    std::vector<T> v;
    v.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) v.push_back(item());
    return v;
  }
};

void write_timetable(Writer& w, const Timetable& tt) {
  w.vec(tt.stops, [&](const Stop& s) {
    w.str(s.name);
    w.f64(s.lat);
    w.f64(s.lon);
  });
  auto u32s = [&](const std::vector<std::uint32_t>& v) {
    w.vec(v, [&](std::uint32_t x) { w.u32(x); });
  };
  auto times = [&](const std::vector<Time>& v) { w.vec(v, [&](Time x) { w.i32(x); }); };
  u32s(tt.footpaths.offset);
  u32s(tt.footpaths.target);
  times(tt.footpaths.duration);
  times(tt.arr);
  times(tt.dep);
  u32s(tt.event_stop);
  u32s(tt.trip_begin);
  u32s(tt.trip_line);
  u32s(tt.trip_pos);
  u32s(tt.line_begin);
  u32s(tt.line_trips);
  u32s(tt.line_stop_begin);
  u32s(tt.line_stops);
  u32s(tt.stop_line_begin);
  w.vec(tt.stop_lines, [&](const LineStop& ls) {
    w.u32(ls.line);
    w.u32(ls.index);
  });
  w.i32(tt.period);
}

Timetable read_timetable(Reader& r) {
  Timetable tt;
  tt.stops = r.vec<Stop>([&] {
    Stop s;
    s.name = r.str();
    s.lat = r.f64();
    s.lon = r.f64();
    return s;
  });
  auto u32s = [&] { return r.vec<std::uint32_t>([&] { return r.u32(); }); };
  auto times = [&] { return r.vec<Time>([&] { return r.i32(); }); };
  tt.footpaths.offset = u32s();
  tt.footpaths.target = u32s();
  tt.footpaths.duration = times();
  tt.arr = times();
  tt.dep = times();
  tt.event_stop = u32s();
  tt.trip_begin = u32s();
  tt.trip_line = u32s();
  tt.trip_pos = u32s();
  tt.line_begin = u32s();
  tt.line_trips = u32s();
  tt.line_stop_begin = u32s();
  tt.line_stops = u32s();
  tt.stop_line_begin = u32s();
  tt.stop_lines = r.vec<LineStop>([&] {
    LineStop ls;
    ls.line = r.u32();
    ls.index = r.u32();
    return ls;
  });
  tt.period = r.i32();
  return tt;
}

}  // namespace

void save_snapshot(const std::string& path, const EngineState& state) {
  std::vector<std::pair<std::uint32_t, std::vector<std::uint8_t>>> sections;
  auto section = [&](std::uint32_t id) -> Writer {
    sections.push_back({id, {}});
    return Writer{sections.back().second};
  };

  if (state.has(Stage::kTimetable)) {
    Writer w = section(kSecTimetable);
    write_timetable(w, state.tt);
  }
  if (state.has(Stage::kTransfers)) {
    Writer w = section(kSecTransfers);
    w.vec(state.transfers.offset, [&](std::uint32_t x) { w.u32(x); });
    w.vec(state.transfers.to, [&](EventId x) { w.u32(x); });
  }
  if (state.has(Stage::kPartition)) {
    Writer w = section(kSecPartition);
    w.u32(state.partition.levels);
    w.f64(state.partition.imbalance);
    w.vec(state.partition.stop_cell, [&](CellId x) { w.u16(x); });
    w.vec(state.partition.event_cell, [&](CellId x) { w.u16(x); });
  }
  if (state.has(Stage::kRanks)) {
    Writer w = section(kSecRanks);
    w.vec(state.transfers.rank, [&](Rank x) { w.u8(x); });
  }
  if (state.has(Stage::kOverlays)) {
    Writer w = section(kSecOverlays);
    w.u32(state.overlays.levels);
    for (std::uint32_t l = 0; l < state.overlays.levels; ++l) {
      w.vec(state.overlays.offset[l], [&](std::uint32_t x) { w.u32(x); });
      w.vec(state.overlays.to[l], [&](EventId x) { w.u32(x); });
    }
  }
  if (state.has(Stage::kSuccessor)) {
    Writer w = section(kSecSuccessor);
    w.u32(state.successor.levels);
    w.u64(state.successor.num_events);
    w.vec(state.successor.data, [&](std::uint8_t x) { w.u8(x); });
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  std::vector<std::uint8_t> head;
  Writer w{head};
  head.insert(head.end(), kMagic, kMagic + 4);
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(sections.size()));
  out.write(reinterpret_cast<const char*>(head.data()), head.size());
  for (const auto& [id, payload] : sections) {
    std::vector<std::uint8_t> sh;
    Writer sw{sh};
    sw.u32(id);
    sw.u64(payload.size());
    sw.u64(fnv1a(payload.data(), payload.size()));
    out.write(reinterpret_cast<const char*>(sh.data()), sh.size());
    out.write(reinterpret_cast<const char*>(payload.data()), payload.size());
  }
  if (!out) throw std::runtime_error("write to " + path + " failed");
}

EngineState load_snapshot(const std::string& path, std::uint32_t required) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  Reader r{bytes.data(), bytes.size()};

  r.need(4);
  if (std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw std::runtime_error(path + " is not a snapshot (bad magic)");
  r.pos = 4;
  std::uint32_t version = r.u32();
  if (version != kVersion)
    throw std::runtime_error("unsupported snapshot version " + std::to_string(version));
  std::uint32_t count = r.u32();

  EngineState state;
  for (std::uint32_t s = 0; s < count; ++s) {
    std::uint32_t id = r.u32();
    std::uint64_t len = r.u64();
    std::uint64_t sum = r.u64();
    r.need(len);
    if (fnv1a(bytes.data() + r.pos, len) != sum)
      throw std::runtime_error("snapshot section " + std::to_string(id) + " checksum mismatch");
    Reader sr{bytes.data() + r.pos, static_cast<std::size_t>(len)};
    r.pos += len;
    switch (id) {
      case kSecTimetable:
        state.tt = read_timetable(sr);
        state.mark(Stage::kTimetable);
        break;
      case kSecTransfers:
        state.transfers.offset = sr.vec<std::uint32_t>([&] { return sr.u32(); });
        state.transfers.to = sr.vec<EventId>([&] { return sr.u32(); });
        state.transfers.rank.assign(state.transfers.to.size(), 0);
        state.mark(Stage::kTransfers);
        break;
      case kSecPartition:
        state.partition.levels = sr.u32();
        state.partition.imbalance = sr.f64();
        state.partition.stop_cell = sr.vec<CellId>([&] { return sr.u16(); });
        state.partition.event_cell = sr.vec<CellId>([&] { return sr.u16(); });
        state.mark(Stage::kPartition);
        break;
      case kSecRanks: {
        auto ranks = sr.vec<Rank>([&] { return sr.u8(); });
        if (ranks.size() != state.transfers.to.size())
          throw std::runtime_error("snapshot ranks do not match the transfer set");
        state.transfers.rank = std::move(ranks);
        state.mark(Stage::kRanks);
        break;
      }
      case kSecOverlays: {
        state.overlays.levels = sr.u32();
        state.overlays.offset.resize(state.overlays.levels);
        state.overlays.to.resize(state.overlays.levels);
        for (std::uint32_t l = 0; l < state.overlays.levels; ++l) {
          state.overlays.offset[l] = sr.vec<std::uint32_t>([&] { return sr.u32(); });
          state.overlays.to[l] = sr.vec<EventId>([&] { return sr.u32(); });
        }
        state.mark(Stage::kOverlays);
        break;
      }
      case kSecSuccessor:
        state.successor.levels = sr.u32();
        state.successor.num_events = sr.u64();
        state.successor.data = sr.vec<std::uint8_t>([&] { return sr.u8(); });
        state.mark(Stage::kSuccessor);
        break;
      default:
        throw std::runtime_error("unknown snapshot section " + std::to_string(id));
    }
  }

  struct Missing {
    Stage stage;
    const char* name;
    const char* producer;
  };
  static const Missing table[] = {
      {Stage::kTimetable, "timetable", "ingest or gen"},
      {Stage::kTransfers, "transfers", "transfers"},
      {Stage::kPartition, "partition", "partition"},
      {Stage::kRanks, "ranks", "customize"},
      {Stage::kOverlays, "overlays", "customize"},
      {Stage::kSuccessor, "successor table", "customize"},
  };
  for (const Missing& m : table)
    if ((required & static_cast<std::uint32_t>(m.stage)) != 0 && !state.has(m.stage))
      throw std::runtime_error("snapshot has no " + std::string(m.name) + "; run " +
                               m.producer + " first");
  return state;
}

}  // namespace trex
