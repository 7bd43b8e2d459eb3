#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "trex/timetable.hpp"

namespace trex {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int col(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    return -1;
  }
};

Csv read_csv(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  Csv csv;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (first && line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xef)
      line.erase(0, 3);  // UTF-8 BOM
    if (line.empty() || line == "\r") continue;
    auto fields = split_csv_line(line);
    if (first) {
      csv.header = std::move(fields);
      first = false;
    } else {
      fields.resize(csv.header.size());
      csv.rows.push_back(std::move(fields));
    }
  }
  return csv;
}

Time parse_gtfs_time(const std::string& s, const fs::path& file) {
  int h = 0, m = 0, sec = 0;
  char c1 = 0, c2 = 0;
  std::istringstream in(s);
  if (!(in >> h >> c1 >> m >> c2 >> sec) || c1 != ':' || c2 != ':' || h < 0 || m < 0 ||
      m > 59 || sec < 0 || sec > 59)
    throw std::runtime_error("unparseable time '" + s + "' in " + file.string());
  return static_cast<Time>(h) * 3600 + m * 60 + sec;
}

int parse_date(const std::string& s) {  // returns days since 1970-01-01
  std::string digits;
  for (char c : s)
    if (c != '-') digits += c;
  if (digits.size() != 8 || digits.find_first_not_of("0123456789") != std::string::npos)
    throw std::runtime_error("unparseable date '" + s + "'");
  int y = std::stoi(digits.substr(0, 4));
  int m = std::stoi(digits.substr(4, 2));
  int d = std::stoi(digits.substr(6, 2));
  // days-from-civil
  y -= m <= 2;
  int era = (y >= 0 ? y : y - 399) / 400;
  unsigned yoe = static_cast<unsigned>(y - era * 400);
  unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<int>(doe) - 719468;
}

int weekday(int days_since_epoch) {  // 0 = Monday
  return ((days_since_epoch % 7) + 7 + 3) % 7;
}

}  // namespace

Timetable load_gtfs(const GtfsOptions& opt) {
  fs::path dir(opt.dir);
  if (!fs::is_directory(dir)) throw std::runtime_error("not a directory: " + opt.dir);
  if (fs::exists(dir / "frequencies.txt"))
    throw std::runtime_error("frequency-based trips (frequencies.txt) are not supported");
  if (opt.day_count < 1 || opt.day_count > 2)
    throw std::runtime_error("day count must be 1 or 2");

  Csv stops_csv = read_csv(dir / "stops.txt");
  int c_id = stops_csv.col("stop_id");
  int c_name = stops_csv.col("stop_name");
  int c_lat = stops_csv.col("stop_lat");
  int c_lon = stops_csv.col("stop_lon");
  if (c_id < 0) throw std::runtime_error("stops.txt lacks stop_id");

  std::vector<Stop> stops;
  std::unordered_map<std::string, StopId> stop_index;
  for (const auto& row : stops_csv.rows) {
    Stop s;
    if (c_name >= 0) s.name = row[c_name];
    if (s.name.empty()) s.name = row[c_id];
    try {
      if (c_lat >= 0 && !row[c_lat].empty()) s.lat = std::stod(row[c_lat]);
      if (c_lon >= 0 && !row[c_lon].empty()) s.lon = std::stod(row[c_lon]);
    } catch (const std::exception&) {
      throw std::runtime_error("bad coordinate for stop " + row[c_id]);
    }
    if (!stop_index.emplace(row[c_id], static_cast<StopId>(stops.size())).second)
      throw std::runtime_error("duplicate stop_id " + row[c_id]);
    stops.push_back(std::move(s));
  }

  int base_day = parse_date(opt.service_day);

  // service activity per relative day
  bool have_calendar = fs::exists(dir / "calendar.txt");
  bool have_dates = fs::exists(dir / "calendar_dates.txt");
  std::unordered_map<std::string, std::vector<bool>> service_active;
  auto mark = [&](const std::string& id, int day, bool active) {
    auto& v = service_active[id];
    if (v.empty()) v.assign(opt.day_count, false);
    v[day] = active;
  };
  if (have_calendar) {
    Csv cal = read_csv(dir / "calendar.txt");
    static const char* day_cols[7] = {"monday",   "tuesday", "wednesday", "thursday",
                                      "friday",   "saturday", "sunday"};
    int c_sid = cal.col("service_id");
    int c_start = cal.col("start_date"), c_end = cal.col("end_date");
    for (const auto& row : cal.rows) {
      int start = parse_date(row[c_start]), end = parse_date(row[c_end]);
      for (int d = 0; d < opt.day_count; ++d) {
        int day = base_day + d;
        int col = cal.col(day_cols[weekday(day)]);
        bool on = day >= start && day <= end && col >= 0 && row[col] == "1";
        if (on) mark(row[c_sid], d, true);
      }
    }
  }
  if (have_dates) {
    Csv dates = read_csv(dir / "calendar_dates.txt");
    int c_sid = dates.col("service_id");
    int c_date = dates.col("date");
    int c_type = dates.col("exception_type");
    for (const auto& row : dates.rows) {
      int day = parse_date(row[c_date]) - base_day;
      if (day < 0 || day >= opt.day_count) continue;
      mark(row[c_sid], day, row[c_type] == "1");
    }
  }
  bool all_services_active = !have_calendar && !have_dates;

  Csv trips_csv = read_csv(dir / "trips.txt");
  int c_tid = trips_csv.col("trip_id");
  int c_sid = trips_csv.col("service_id");
  if (c_tid < 0) throw std::runtime_error("trips.txt lacks trip_id");
  std::unordered_map<std::string, std::string> trip_service;
  for (const auto& row : trips_csv.rows)
    trip_service[row[c_tid]] = c_sid >= 0 ? row[c_sid] : "";

  Csv st = read_csv(dir / "stop_times.txt");
  int c_trip = st.col("trip_id");
  int c_arr = st.col("arrival_time");
  int c_dep = st.col("departure_time");
  int c_stop = st.col("stop_id");
  int c_seq = st.col("stop_sequence");
  if (c_trip < 0 || c_arr < 0 || c_dep < 0 || c_stop < 0 || c_seq < 0)
    throw std::runtime_error("stop_times.txt lacks a required column");

  struct StopTime {
    long seq;
    StopId stop;
    Time arr, dep;
  };
  std::map<std::string, std::vector<StopTime>> by_trip;
  fs::path st_path = dir / "stop_times.txt";
  for (const auto& row : st.rows) {
    auto it = stop_index.find(row[c_stop]);
    if (it == stop_index.end())
      throw std::runtime_error("stop_times.txt references unknown stop " + row[c_stop]);
    StopTime s;
    s.seq = std::stol(row[c_seq]);
    s.stop = it->second;
    s.arr = parse_gtfs_time(row[c_arr], st_path);
    s.dep = parse_gtfs_time(row[c_dep], st_path);
    by_trip[row[c_trip]].push_back(s);
  }

  std::vector<RawTrip> raw;
  std::size_t dropped = 0;
  for (auto& [trip_id, events] : by_trip) {
    auto sit = trip_service.find(trip_id);
    if (sit == trip_service.end())
      throw std::runtime_error("stop_times.txt references unknown trip " + trip_id);
    std::stable_sort(events.begin(), events.end(),
                     [](const StopTime& a, const StopTime& b) { return a.seq < b.seq; });
    for (int d = 0; d < opt.day_count; ++d) {
      bool active = all_services_active;
      if (!active) {
        auto ait = service_active.find(sit->second);
        active = ait != service_active.end() && ait->second[d];
      }
      if (!active) continue;
      if (events.size() < 2) {
        ++dropped;
        continue;
      }
      RawTrip t;
      Time shift = d * 86400;
      for (const auto& e : events) {
        t.stops.push_back(e.stop);
        t.arr.push_back(e.arr + shift);
        t.dep.push_back(e.dep + shift);
      }
      for (std::size_t i = 0; i < t.stops.size(); ++i) {
        if (t.arr[i] > t.dep[i])
          throw std::runtime_error("trip " + trip_id + " departs before it arrives");
        if (i + 1 < t.stops.size() && t.dep[i] > t.arr[i + 1])
          throw std::runtime_error("trip " + trip_id + " is not time ordered");
      }
      raw.push_back(std::move(t));
    }
  }
  if (dropped > 0)
    std::cerr << "dropped " << dropped << " trip instances with fewer than two events\n";

  std::vector<RawFootpath> paths;
  if (fs::exists(dir / "transfers.txt")) {
    Csv tr = read_csv(dir / "transfers.txt");
    int c_from = tr.col("from_stop_id");
    int c_to = tr.col("to_stop_id");
    int c_type = tr.col("transfer_type");
    int c_time = tr.col("min_transfer_time");
    for (const auto& row : tr.rows) {
      if (c_type < 0 || row[c_type] != "2" || c_time < 0 || row[c_time].empty()) continue;
      auto a = stop_index.find(row[c_from]);
      auto b = stop_index.find(row[c_to]);
      if (a == stop_index.end() || b == stop_index.end()) continue;
      paths.push_back({a->second, b->second, static_cast<Time>(std::stol(row[c_time]))});
    }
  }

  FootpathSet fp = close_footpaths(paths, stops.size());
  Timetable tt = build_timetable(std::move(stops), raw, std::move(fp),
                                 static_cast<Time>(opt.day_count) * 86400);
  if (opt.buffer > 0) apply_buffer_time(tt, opt.buffer);
  return tt;
}

}  // namespace trex
