// Copyright 2026 The normef Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================
#include "normef/trace_io.hpp"

#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace normef {

std::string format_real(double x) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  if (ec != std::errc()) throw std::runtime_error("format_real: conversion failed");
  return std::string(buf, ptr);
}

void write_csv(std::ostream& out, std::span<const MetricsRecord> records) {
  out << kTrajectoryCsvHeader << '\n';
  for (const MetricsRecord& r : records) {
    out << r.t << ',' << format_real(r.grad_norm) << ',' << format_real(r.f_value) << ','
        << format_real(r.V) << ',' << format_real(r.U) << ',' << format_real(r.gamma) << ','
        << format_real(r.eta) << ',' << r.cumulative_bits << '\n';
  }
}

void write_jsonl(std::ostream& out, std::span<const MetricsRecord> records) {
  for (const MetricsRecord& r : records) {
    nlohmann::ordered_json row;
    row["t"] = r.t;
    row["grad_norm"] = r.grad_norm;
    row["f_value"] = r.f_value;
    row["V_t"] = r.V;
    row["U_t"] = r.U;
    row["gamma_t"] = r.gamma;
    row["eta_t"] = r.eta;
    row["cum_bits"] = r.cumulative_bits;
    out << row.dump() << '\n';
  }
}

namespace {

template <typename T>
T parse_field(const std::string& text, std::size_t line) {
  T value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw std::runtime_error("read_csv: malformed field '" + text + "' on line " +
                             std::to_string(line));
  return value;
}

}  // namespace

std::vector<MetricsRecord> read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kTrajectoryCsvHeader)
    throw std::runtime_error("read_csv: missing or unexpected header");
  std::vector<MetricsRecord> records;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 8)
      throw std::runtime_error("read_csv: expected 8 fields on line " + std::to_string(line_no));
    MetricsRecord r;
    r.t = parse_field<std::size_t>(fields[0], line_no);
    r.grad_norm = parse_field<double>(fields[1], line_no);
    r.f_value = parse_field<double>(fields[2], line_no);
    r.V = parse_field<double>(fields[3], line_no);
    r.U = parse_field<double>(fields[4], line_no);
    r.gamma = parse_field<double>(fields[5], line_no);
    r.eta = parse_field<double>(fields[6], line_no);
    r.cumulative_bits = parse_field<std::uint64_t>(fields[7], line_no);
    records.push_back(r);
  }
  return records;
}

}  // namespace normef
