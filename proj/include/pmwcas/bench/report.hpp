/*
 * Copyright 2026 The pmwcas Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <json.hpp>

#include <charconv>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "pmwcas/bench/runner.hpp"
#include "pmwcas/bench/workload.hpp"
#include "pmwcas/errors.hpp"
#include "pmwcas/layout.hpp"

namespace pmwcas::bench {

inline constexpr std::string_view kCsvHeader =
    "algorithm,threads,k,words,alpha,block_size,timeout_s,max_ops,seed,backend,order,"
    "succeeded,failed,elapsed_s,throughput,p1_ns,p50_ns,p99_ns,"
    "cas_count,dirty_store_count,flush_count,descriptor_persist_count,retry_count";

/// Shortest decimal form that parses back to the same double.
inline std::string FormatDouble(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string ToCsvRow(const BenchReport& r) {
  const BenchConfig& c = r.config;
  std::string row;
  const auto field = [&](std::string_view v) {
    if (!row.empty()) row += ',';
    row += v;
  };
  const auto num = [&](std::uint64_t v) { field(std::to_string(v)); };
  field(ToString(c.algorithm));
  num(c.threads);
  num(c.k);
  num(c.words);
  field(FormatDouble(c.alpha));
  num(c.block_size);
  field(FormatDouble(c.timeout_s));
  num(c.max_ops);
  num(c.seed);
  field(ToString(c.backend));
  field(ToString(c.order));
  num(r.succeeded);
  num(r.failed);
  field(FormatDouble(r.elapsed_s));
  field(FormatDouble(r.throughput));
  num(r.p1_ns);
  num(r.p50_ns);
  num(r.p99_ns);
  num(r.stats.cas_count);
  num(r.stats.dirty_store_count);
  num(r.stats.flush_count);
  num(r.stats.descriptor_persist_count);
  num(r.stats.retry_count);
  return row;
}

inline std::string ToCsv(const std::vector<BenchReport>& reports) {
  std::string out{kCsvHeader};
  out += '\n';
  for (const auto& r : reports) out += ToCsvRow(r) + '\n';
  return out;
}

inline nlohmann::json ToJson(const BenchConfig& c) {
  return {{"algorithm", ToString(c.algorithm)},
          {"threads", c.threads},
          {"k", c.k},
          {"words", c.words},
          {"alpha", c.alpha},
          {"block_size", c.block_size},
          {"timeout_s", c.timeout_s},
          {"max_ops", c.max_ops},
          {"seed", c.seed},
          {"backend", ToString(c.backend)},
          {"order", ToString(c.order)},
          {"heap_path", c.heap_path}};
}

inline BenchConfig ConfigFromJson(const nlohmann::json& j) {
  BenchConfig c;
  c.algorithm = ParseAlgorithm(j.at("algorithm").get<std::string>());
  c.threads = j.at("threads").get<std::uint32_t>();
  c.k = j.at("k").get<std::uint32_t>();
  c.words = j.at("words").get<std::uint64_t>();
  c.alpha = j.at("alpha").get<double>();
  c.block_size = j.at("block_size").get<std::uint32_t>();
  c.timeout_s = j.at("timeout_s").get<double>();
  c.max_ops = j.at("max_ops").get<std::uint64_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.backend = ParseBackend(j.at("backend").get<std::string>());
  c.order = ParseTargetOrder(j.at("order").get<std::string>());
  c.heap_path = j.value("heap_path", std::string{});
  return c;
}

inline nlohmann::json ToJson(const BenchReport& r) {
  return {{"config", ToJson(r.config)},
          {"results",
           {{"succeeded", r.succeeded},
            {"failed", r.failed},
            {"elapsed_s", r.elapsed_s},
            {"throughput", r.throughput},
            {"latency_ns", {{"p1", r.p1_ns}, {"p50", r.p50_ns}, {"p99", r.p99_ns}}}}},
          {"instrumentation",
           {{"cas_count", r.stats.cas_count},
            {"dirty_store_count", r.stats.dirty_store_count},
            {"flush_count", r.stats.flush_count},
            {"descriptor_persist_count", r.stats.descriptor_persist_count},
            {"retry_count", r.stats.retry_count}}},
          {"checks", {{"payload_sum", r.payload_sum}, {"tagged_words", r.tagged_words}}}};
}

inline BenchReport ReportFromJson(const nlohmann::json& j) {
  try {
    BenchReport r;
    r.config = ConfigFromJson(j.at("config"));
    const auto& res = j.at("results");
    r.succeeded = res.at("succeeded").get<std::uint64_t>();
    r.failed = res.at("failed").get<std::uint64_t>();
    r.elapsed_s = res.at("elapsed_s").get<double>();
    r.throughput = res.at("throughput").get<double>();
    r.p1_ns = res.at("latency_ns").at("p1").get<std::uint64_t>();
    r.p50_ns = res.at("latency_ns").at("p50").get<std::uint64_t>();
    r.p99_ns = res.at("latency_ns").at("p99").get<std::uint64_t>();
    const auto& ins = j.at("instrumentation");
    r.stats.cas_count = ins.at("cas_count").get<std::uint64_t>();
    r.stats.dirty_store_count = ins.at("dirty_store_count").get<std::uint64_t>();
    r.stats.flush_count = ins.at("flush_count").get<std::uint64_t>();
    r.stats.descriptor_persist_count = ins.at("descriptor_persist_count").get<std::uint64_t>();
    r.stats.retry_count = ins.at("retry_count").get<std::uint64_t>();
    r.payload_sum = j.at("checks").at("payload_sum").get<std::uint64_t>();
    r.tagged_words = j.at("checks").at("tagged_words").get<std::uint64_t>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ContractViolation(std::string("malformed report: ") + e.what());
  }
}

namespace detail {

inline std::vector<std::string> Split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    out.emplace_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

template <class T>
T ParseNumber(std::string_view s, std::string_view what) {
  T v{};
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw ContractViolation("bad value '" + std::string(s) + "' for " + std::string(what));
  }
  return v;
}

inline void SetParam(BenchConfig& c, std::string_view name, std::string_view value) {
  if (name == "algorithm") {
    c.algorithm = ParseAlgorithm(value);
  } else if (name == "threads") {
    c.threads = ParseNumber<std::uint32_t>(value, name);
  } else if (name == "k" || name == "targets") {
    c.k = ParseNumber<std::uint32_t>(value, name);
  } else if (name == "words") {
    c.words = ParseNumber<std::uint64_t>(value, name);
  } else if (name == "alpha") {
    c.alpha = ParseNumber<double>(value, name);
  } else if (name == "block_size" || name == "block-size") {
    c.block_size = ParseNumber<std::uint32_t>(value, name);
  } else if (name == "timeout_s" || name == "timeout-s") {
    c.timeout_s = ParseNumber<double>(value, name);
  } else if (name == "max_ops" || name == "max-ops") {
    c.max_ops = ParseNumber<std::uint64_t>(value, name);
  } else if (name == "seed") {
    c.seed = ParseNumber<std::uint64_t>(value, name);
  } else if (name == "backend") {
    c.backend = ParseBackend(value);
  } else if (name == "order") {
    c.order = ParseTargetOrder(value);
  } else {
    throw ContractViolation("unknown sweep parameter '" + std::string(name) + "'");
  }
}

}  // namespace detail

/**
 * Expands sweep specs into the cross product of configurations. Each spec
 * is "param=v1,v2,..."; several specs may be joined with ';'. Parameters
 * vary in the order given, the last one fastest.
 */
inline std::vector<BenchConfig> ExpandSweep(const BenchConfig& base, const std::vector<std::string>& specs) {
  std::vector<std::pair<std::string, std::vector<std::string>>> axes;
  for (const auto& spec : specs) {
    for (const auto& part : detail::Split(spec, ';')) {
      if (part.empty()) continue;
      const auto eq = part.find('=');
      if (eq == std::string::npos || eq == 0 || eq + 1 == part.size()) {
        throw ContractViolation("sweep spec '" + part + "' is not param=v1,v2,...");
      }
      axes.emplace_back(part.substr(0, eq), detail::Split(std::string_view{part}.substr(eq + 1), ','));
    }
  }
  std::vector<BenchConfig> configs{base};
  for (const auto& [name, values] : axes) {
    std::vector<BenchConfig> next;
    for (const auto& c : configs) {
      for (const auto& v : values) {
        BenchConfig copy = c;
        detail::SetParam(copy, name, v);
        next.push_back(copy);
      }
    }
    configs = std::move(next);
  }
  return configs;
}

}  // namespace pmwcas::bench
