#pragma once

// Cohort file format (line-delimited JSON):
//
//   line 1   {"format":"dcrkit-cohort","version":1,"k":3,"d":4,
//             "feature_names":[...],"risk_names":[...],"subjects":n}
//   line 2.. {"timestamps":[...],"features":[[row],...],"observed":[[0|1,...],...],
//             "static":[0|1,...],"event":K,"time":Y}
//
// Doubles are written in shortest round-trip form, so read(write(c)) == c bit
// for bit and write(read(f)) == f byte for byte.

#include "dcrkit/cohort.hpp"
#include "dcrkit/core.hpp"

#include <json.hpp>

#include <filesystem>
#include <sstream>
#include <string>

namespace dcrkit {

namespace detail {

using Json = nlohmann::json;

inline Json header_json(const Cohort& c) {
  return Json{{"format", "dcrkit-cohort"}, {"version", 1},           {"k", c.k}, {"d", c.width()},
              {"feature_names", c.feature_names}, {"risk_names", c.risk_names}, {"subjects", c.size()}};
}

inline Json subject_json(const Subject& s) {
  const auto& z = s.series;
  Json rows = Json::array();
  Json mask = Json::array();
  for (Index l = 0; l < z.length(); ++l) {
    Json row = Json::array();
    Json mrow = Json::array();
    for (Index c = 0; c < z.width(); ++c) {
      row.push_back(z.features(l, c));
      mrow.push_back(z.observed(l, c) ? 1 : 0);
    }
    rows.push_back(std::move(row));
    mask.push_back(std::move(mrow));
  }
  Json stat = Json::array();
  for (Index c = 0; c < z.width(); ++c) stat.push_back(z.static_mask(c) ? 1 : 0);
  Json ts = Json::array();
  for (Index l = 0; l < z.length(); ++l) ts.push_back(z.timestamps(l));
  return Json{{"timestamps", ts}, {"features", rows},           {"observed", mask},
              {"static", stat},   {"event", s.outcome.event}, {"time", s.outcome.time}};
}

inline Subject subject_from_json(const Json& j, Index d) {
  Subject s;
  const auto& ts = j.at("timestamps");
  const auto& rows = j.at("features");
  const auto& mask = j.at("observed");
  const auto& stat = j.at("static");
  const auto L = static_cast<Index>(ts.size());
  require(static_cast<Index>(rows.size()) == L && static_cast<Index>(mask.size()) == L,
          "record row counts disagree with timestamps");
  require(static_cast<Index>(stat.size()) == d, "record static flags disagree with header d");
  auto& z = s.series;
  z.timestamps.resize(L);
  z.features.resize(L, d);
  z.observed.resize(L, d);
  z.static_mask.resize(d);
  for (Index l = 0; l < L; ++l) {
    z.timestamps(l) = ts[static_cast<std::size_t>(l)].get<double>();
    const auto& row = rows[static_cast<std::size_t>(l)];
    const auto& mrow = mask[static_cast<std::size_t>(l)];
    require(static_cast<Index>(row.size()) == d && static_cast<Index>(mrow.size()) == d,
            "record row width disagrees with header d");
    for (Index c = 0; c < d; ++c) {
      z.features(l, c) = row[static_cast<std::size_t>(c)].get<double>();
      z.observed(l, c) = mrow[static_cast<std::size_t>(c)].get<int>() != 0;
    }
  }
  for (Index c = 0; c < d; ++c) z.static_mask(c) = stat[static_cast<std::size_t>(c)].get<int>() != 0;
  s.outcome.event = j.at("event").get<int>();
  s.outcome.time = j.at("time").get<double>();
  return s;
}

}  // namespace detail

inline std::string format_cohort(const Cohort& c) {
  std::string out = detail::header_json(c).dump();
  out += '\n';
  for (const auto& s : c.subjects) {
    out += detail::subject_json(s).dump();
    out += '\n';
  }
  return out;
}

inline Cohort parse_cohort(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), "cohort file is empty");
  Cohort c;
  std::size_t line_no = 1;
  try {
    const auto header = detail::Json::parse(line);
    require(header.at("format").get<std::string>() == "dcrkit-cohort", "not a dcrkit cohort file");
    c.k = header.at("k").get<int>();
    c.feature_names = header.at("feature_names").get<std::vector<std::string>>();
    c.risk_names = header.at("risk_names").get<std::vector<std::string>>();
    const auto d = header.at("d").get<Index>();
    require(static_cast<Index>(c.feature_names.size()) == d, "feature_names length disagrees with d");
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      c.subjects.push_back(detail::subject_from_json(detail::Json::parse(line), d));
    }
  } catch (const detail::Json::exception& e) {
    throw InputError("cohort file line " + std::to_string(line_no) + ": " + e.what());
  } catch (const InputError& e) {
    throw InputError("cohort file line " + std::to_string(line_no) + ": " + e.what());
  }
  c.validate();
  return c;
}

inline void write_cohort(const Cohort& c, const std::filesystem::path& path) {
  write_file_atomic(path, format_cohort(c));
}

inline Cohort read_cohort(const std::filesystem::path& path) { return parse_cohort(read_file(path)); }

/// Dense numeric stream file: a header line "q seconds" followed by `seconds`
/// rows of q whitespace- or comma-separated numbers.
inline Matrix parse_stream_matrix(const std::string& text) {
  std::string cleaned = text;
  for (char& ch : cleaned) {
    if (ch == ',') ch = ' ';
  }
  std::istringstream in(cleaned);
  long q = 0;
  long seconds = 0;
  require(static_cast<bool>(in >> q >> seconds), "stream header must be \"q seconds\"");
  require(q >= 1, "stream header: q must be >= 1");
  require(seconds >= 0, "stream header: seconds must be >= 0");
  Matrix raw(seconds, q);
  for (long r = 0; r < seconds; ++r) {
    for (long c = 0; c < q; ++c) {
      require(static_cast<bool>(in >> raw(r, c)),
              "stream body: expected " + std::to_string(seconds * q) + " values, ran out at row " + std::to_string(r));
    }
  }
  return raw;
}

}  // namespace dcrkit
