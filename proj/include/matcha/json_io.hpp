#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "matcha/error.hpp"
#include "matcha/matrix.hpp"

namespace matcha {

namespace detail {

// Shortest text that reads back as the same float. Negative zero is written
// with a fraction so JSON readers keep it a float and keep the sign.
inline void append_float(std::string& out, float v) {
  if (v == 0.0f && std::signbit(v)) {
    out += "-0.0";
    return;
  }
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, end);
}

// Streams the matrix document through nlohmann's SAX interface so that float
// tokens are converted straight from their text, never through double.
class MatrixSax : public nlohmann::json_sax<nlohmann::json> {
 public:
  using json = nlohmann::json;

  std::optional<std::uint64_t> rows, cols;
  std::vector<float> data;
  bool data_seen = false;
  std::string error;
  std::size_t error_pos = 0;

  bool null() override { return scalar("null"); }
  bool boolean(bool) override { return scalar("boolean"); }
  bool string(string_t&) override { return scalar("string"); }
  bool binary(binary_t&) override { return scalar("binary"); }

  bool number_integer(number_integer_t v) override {
    if (in_data_) {
      data.push_back(static_cast<float>(v));
      return true;
    }
    if (depth_ == 1 && is_dim_key()) return fail("\"" + key_ + "\" must be a positive integer");
    return scalar("number");
  }

  bool number_unsigned(number_unsigned_t v) override {
    if (in_data_) {
      data.push_back(static_cast<float>(v));
      return true;
    }
    if (depth_ == 1 && key_ == "rows") {
      rows = v;
      return true;
    }
    if (depth_ == 1 && key_ == "cols") {
      cols = v;
      return true;
    }
    return scalar("number");
  }

  bool number_float(number_float_t, const string_t& raw) override {
    if (in_data_) {
      float f = 0.0f;
      auto [ptr, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), f);
      if (ec != std::errc{} || !std::isfinite(f)) {
        return fail("data element " + std::to_string(data.size()) + " (" + raw + ") is not a finite 32-bit value");
      }
      data.push_back(f);
      return true;
    }
    if (depth_ == 1 && is_dim_key()) return fail("\"" + key_ + "\" must be a positive integer");
    return scalar("number");
  }

  bool start_object(std::size_t) override {
    if (in_data_) return fail("data must contain only numbers");
    ++depth_;
    return true;
  }
  bool end_object() override {
    --depth_;
    return true;
  }
  bool start_array(std::size_t) override {
    if (depth_ == 0) return fail("matrix document must be a JSON object");
    if (in_data_) return fail("data must be a flat array of numbers");
    ++depth_;
    if (depth_ == 2 && key_ == "data") {
      in_data_ = true;
      data_seen = true;
      data.clear();
    }
    return true;
  }
  bool end_array() override {
    if (in_data_ && depth_ == 2) in_data_ = false;
    --depth_;
    return true;
  }
  bool key(string_t& k) override {
    if (depth_ == 1) key_ = k;
    return true;
  }

  bool parse_error(std::size_t position, const std::string&, const nlohmann::detail::exception& ex) override {
    error = ex.what();
    error_pos = position;
    return false;
  }

 private:
  bool is_dim_key() const { return key_ == "rows" || key_ == "cols"; }

  bool scalar(const char* kind) {
    if (depth_ == 0) return fail("matrix document must be a JSON object");
    if (in_data_) return fail(std::string("data must contain only numbers, found ") + kind);
    if (depth_ == 1 && is_dim_key()) return fail("\"" + key_ + "\" must be a positive integer");
    return true;
  }

  bool fail(std::string msg) {
    error = std::move(msg);
    return false;
  }

  int depth_ = 0;
  bool in_data_ = false;
  std::string key_;
};

}  // namespace detail

// {"rows":R,"cols":C,"data":[...]} with data always row-major.
inline std::string to_json(const Matrix& a) {
  if (a.empty()) throw DimensionError("cannot serialise an empty matrix");
  const auto values = a.to_vector();
  std::string out = "{\"rows\":" + std::to_string(a.rows()) + ",\"cols\":" + std::to_string(a.cols()) + ",\"data\":[";
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw ValueError("element " + std::to_string(i) + " is not finite and has no JSON representation");
    }
    if (i) out += ',';
    detail::append_float(out, values[i]);
  }
  out += "]}";
  return out;
}

inline Matrix from_json(std::string_view text) {
  detail::MatrixSax sax;
  const bool ok = nlohmann::json::sax_parse(text.begin(), text.end(), &sax);
  const auto data_pos = [&] {
    auto p = text.find("\"data\"");
    return p == std::string_view::npos ? std::size_t{0} : p;
  };
  if (!ok) {
    // The parser counts characters read, including the offending one (or
    // end of input). SAX callbacks get no offset; semantic errors point at
    // the data key.
    const std::size_t pos = sax.error_pos ? std::min(sax.error_pos - 1, text.size()) : data_pos();
    throw ParseError("malformed matrix JSON: " + sax.error, pos);
  }
  if (!sax.rows || !sax.cols || *sax.rows == 0 || *sax.cols == 0) {
    throw ParseError("matrix JSON needs positive integer \"rows\" and \"cols\"", 0);
  }
  if (!sax.data_seen) throw ParseError("matrix JSON has no \"data\" array", 0);
  const std::uint64_t expected = *sax.rows * *sax.cols;
  if (sax.data.size() != expected) {
    throw ParseError("data holds " + std::to_string(sax.data.size()) + " values but rows*cols is " +
                         std::to_string(expected),
                     data_pos());
  }
  return Matrix(static_cast<std::size_t>(*sax.rows), static_cast<std::size_t>(*sax.cols), std::move(sax.data));
}

}  // namespace matcha
