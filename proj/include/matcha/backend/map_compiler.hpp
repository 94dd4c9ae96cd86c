#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <system_error>
#include <cmath>
#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "matcha/error.hpp"

namespace matcha::backend {

// Elementwise expression language used by map kernels.
//
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := '-' unary | primary
//   primary := number | 'i' | input '[' 'i' ']' | fn1 '(' expr ')'
//            | fn2 '(' expr ',' expr ')' | '(' expr ')'
//
// Inputs are the letters a, b, c, d (as many as the arity). fn1 is one of
// exp log tanh sqrt fabs; fn2 is fmax or fmin. `i` alone is the element
// index as a float. Arithmetic is single precision.

enum class OpCode { input, constant, index, neg, add, sub, mul, div, exp, log, tanh, sqrt, fabs, fmax, fmin };

struct Instruction {
  OpCode op;
  std::size_t slot = 0;  // input number for OpCode::input
  float value = 0.0f;    // literal for OpCode::constant
};

// Logical (row-major) view of a kernel input.
struct InputView {
  const float* data;
  std::size_t rows;
  std::size_t cols;
  bool row_major;

  float operator[](std::size_t i) const noexcept {
    if (row_major) return data[i];
    return data[(i % cols) * rows + i / cols];
  }
};

class MapProgram {
 public:
  static constexpr std::size_t kBlock = 256;

  MapProgram(std::string source, std::size_t arity, std::vector<Instruction> code)
      : source_(std::move(source)), arity_(arity), code_(std::move(code)) {
    std::size_t depth = 0;
    for (const auto& ins : code_) {
      depth += stack_effect(ins.op);
      max_depth_ = std::max(max_depth_, depth);
    }
  }

  const std::string& source() const noexcept { return source_; }
  std::size_t arity() const noexcept { return arity_; }
  const std::vector<Instruction>& code() const noexcept { return code_; }

  // Evaluates elements [begin, end) into out[begin, end).
  void run(std::span<const InputView> inputs, float* out, std::size_t begin, std::size_t end) const {
    std::vector<float> stack(max_depth_ * kBlock);
    for (std::size_t base = begin; base < end; base += kBlock) {
      const std::size_t len = std::min(kBlock, end - base);
      std::size_t top = 0;
      for (const auto& ins : code_) {
        float* dst = stack.data() + top * kBlock;
        float* lhs = top ? dst - kBlock : nullptr;  // current top of stack
        switch (ins.op) {
          case OpCode::input: {
            const auto& in = inputs[ins.slot];
            if (in.row_major) {
              std::copy_n(in.data + base, len, dst);
            } else {
              for (std::size_t k = 0; k < len; ++k) dst[k] = in[base + k];
            }
            ++top;
            break;
          }
          case OpCode::constant:
            std::fill_n(dst, len, ins.value);
            ++top;
            break;
          case OpCode::index:
            for (std::size_t k = 0; k < len; ++k) dst[k] = static_cast<float>(base + k);
            ++top;
            break;
          case OpCode::neg: unary(lhs, len, [](float x) { return -x; }); break;
          case OpCode::exp: unary(lhs, len, [](float x) { return std::exp(x); }); break;
          case OpCode::log: unary(lhs, len, [](float x) { return std::log(x); }); break;
          case OpCode::tanh: unary(lhs, len, [](float x) { return std::tanh(x); }); break;
          case OpCode::sqrt: unary(lhs, len, [](float x) { return std::sqrt(x); }); break;
          case OpCode::fabs: unary(lhs, len, [](float x) { return std::fabs(x); }); break;
          case OpCode::add: top = binary(stack.data(), top, len, [](float x, float y) { return x + y; }); break;
          case OpCode::sub: top = binary(stack.data(), top, len, [](float x, float y) { return x - y; }); break;
          case OpCode::mul: top = binary(stack.data(), top, len, [](float x, float y) { return x * y; }); break;
          case OpCode::div: top = binary(stack.data(), top, len, [](float x, float y) { return x / y; }); break;
          case OpCode::fmax:
            top = binary(stack.data(), top, len, [](float x, float y) { return std::fmax(x, y); });
            break;
          case OpCode::fmin:
            top = binary(stack.data(), top, len, [](float x, float y) { return std::fmin(x, y); });
            break;
        }
      }
      std::copy_n(stack.data(), len, out + base);
    }
  }

 private:
  static std::size_t stack_effect(OpCode op) noexcept {
    switch (op) {
      case OpCode::input:
      case OpCode::constant:
      case OpCode::index: return 1;
      case OpCode::add:
      case OpCode::sub:
      case OpCode::mul:
      case OpCode::div:
      case OpCode::fmax:
      case OpCode::fmin: return static_cast<std::size_t>(-1);
      default: return 0;
    }
  }

  template <typename F>
  static void unary(float* x, std::size_t len, F f) {
    for (std::size_t k = 0; k < len; ++k) x[k] = f(x[k]);
  }

  template <typename F>
  static std::size_t binary(float* stack, std::size_t top, std::size_t len, F f) {
    float* x = stack + (top - 2) * kBlock;
    const float* y = stack + (top - 1) * kBlock;
    for (std::size_t k = 0; k < len; ++k) x[k] = f(x[k], y[k]);
    return top - 1;
  }

  std::string source_;
  std::size_t arity_;
  std::vector<Instruction> code_;
  std::size_t max_depth_ = 0;
};

namespace detail {

enum class TokenKind { number, ident, plus, minus, star, slash, lparen, rparen, lbracket, rbracket, comma, end };

struct Token {
  TokenKind kind;
  std::string text;
  std::size_t pos;
  float value = 0.0f;
};

inline std::vector<Token> tokenize(std::string_view src) {
  std::vector<Token> out;
  std::size_t p = 0;
  const auto is_digit = [](char c) { return c >= '0' && c <= '9'; };
  const auto is_alpha = [](char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; };
  while (p < src.size()) {
    const char c = src[p];
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      ++p;
      continue;
    }
    const std::size_t start = p;
    if (is_digit(c) || (c == '.' && p + 1 < src.size() && is_digit(src[p + 1]))) {
      while (p < src.size() && is_digit(src[p])) ++p;
      if (p < src.size() && src[p] == '.') {
        ++p;
        while (p < src.size() && is_digit(src[p])) ++p;
      }
      if (p < src.size() && (src[p] == 'e' || src[p] == 'E')) {
        std::size_t q = p + 1;
        if (q < src.size() && (src[q] == '+' || src[q] == '-')) ++q;
        if (q < src.size() && is_digit(src[q])) {
          p = q;
          while (p < src.size() && is_digit(src[p])) ++p;
        }
      }
      const std::string text(src.substr(start, p - start));
      if (p < src.size() && (src[p] == 'f' || src[p] == 'F')) ++p;
      if (p < src.size() && (is_alpha(src[p]) || is_digit(src[p]) || src[p] == '.')) {
        throw CompileError("malformed number", std::string(src.substr(start, p - start + 1)), start);
      }
      float v = 0.0f;
      auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
      if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(v)) {
        throw CompileError("number is not a finite float", text, start);
      }
      out.push_back({TokenKind::number, text, start, v});
      continue;
    }
    if (is_alpha(c)) {
      while (p < src.size() && (is_alpha(src[p]) || is_digit(src[p]))) ++p;
      out.push_back({TokenKind::ident, std::string(src.substr(start, p - start)), start});
      continue;
    }
    TokenKind kind;
    switch (c) {
      case '+': kind = TokenKind::plus; break;
      case '-': kind = TokenKind::minus; break;
      case '*': kind = TokenKind::star; break;
      case '/': kind = TokenKind::slash; break;
      case '(': kind = TokenKind::lparen; break;
      case ')': kind = TokenKind::rparen; break;
      case '[': kind = TokenKind::lbracket; break;
      case ']': kind = TokenKind::rbracket; break;
      case ',': kind = TokenKind::comma; break;
      default: throw CompileError("unexpected character", std::string(1, c), start);
    }
    out.push_back({kind, std::string(1, c), start});
    ++p;
  }
  out.push_back({TokenKind::end, "<end>", src.size()});
  return out;
}

// Recursive descent straight to postfix code.
class Parser {
 public:
  Parser(std::vector<Token> tokens, std::size_t arity) : tokens_(std::move(tokens)), arity_(arity) {}

  std::vector<Instruction> parse() {
    expr();
    if (peek().kind != TokenKind::end) fail("unexpected token after expression");
    return std::move(code_);
  }

 private:
  const Token& peek() const { return tokens_[pos_]; }
  const Token& take() { return tokens_[pos_++]; }

  [[noreturn]] void fail(const std::string& why) const { throw CompileError(why, peek().text, peek().pos); }

  void expect(TokenKind kind, const char* what) {
    if (peek().kind != kind) fail(std::string("expected ") + what);
    ++pos_;
  }

  void expr() {
    term();
    while (peek().kind == TokenKind::plus || peek().kind == TokenKind::minus) {
      const auto op = take().kind == TokenKind::plus ? OpCode::add : OpCode::sub;
      term();
      code_.push_back({op});
    }
  }

  void term() {
    unary();
    while (peek().kind == TokenKind::star || peek().kind == TokenKind::slash) {
      const auto op = take().kind == TokenKind::star ? OpCode::mul : OpCode::div;
      unary();
      code_.push_back({op});
    }
  }

  void unary() {
    if (peek().kind == TokenKind::minus) {
      ++pos_;
      unary();
      code_.push_back({OpCode::neg});
      return;
    }
    primary();
  }

  void primary() {
    const Token& t = peek();
    switch (t.kind) {
      case TokenKind::number:
        ++pos_;
        code_.push_back({OpCode::constant, 0, t.value});
        return;
      case TokenKind::lparen:
        ++pos_;
        expr();
        expect(TokenKind::rparen, "')'");
        return;
      case TokenKind::ident:
        identifier();
        return;
      default:
        fail("expected a number, input, function or '('");
    }
  }

  void identifier() {
    const Token& t = take();
    if (t.text == "i") {
      code_.push_back({OpCode::index});
      return;
    }
    if (t.text.size() == 1 && t.text[0] >= 'a' && t.text[0] <= 'z' && peek().kind == TokenKind::lbracket) {
      const std::size_t slot = static_cast<std::size_t>(t.text[0] - 'a');
      if (slot >= arity_) {
        throw CompileError("unknown identifier (kernel has " + std::to_string(arity_) + " input(s))", t.text, t.pos);
      }
      ++pos_;
      if (peek().kind != TokenKind::ident || peek().text != "i") fail("inputs can only be indexed by i");
      ++pos_;
      expect(TokenKind::rbracket, "']'");
      code_.push_back({OpCode::input, slot});
      return;
    }
    struct Fn {
      const char* name;
      OpCode op;
      int args;
    };
    static constexpr std::array<Fn, 7> fns{{{"exp", OpCode::exp, 1},
                                            {"log", OpCode::log, 1},
                                            {"tanh", OpCode::tanh, 1},
                                            {"sqrt", OpCode::sqrt, 1},
                                            {"fabs", OpCode::fabs, 1},
                                            {"fmax", OpCode::fmax, 2},
                                            {"fmin", OpCode::fmin, 2}}};
    for (const auto& fn : fns) {
      if (t.text != fn.name) continue;
      expect(TokenKind::lparen, "'(' after function name");
      expr();
      if (fn.args == 2) {
        expect(TokenKind::comma, "',' (function takes two arguments)");
        expr();
      }
      expect(TokenKind::rparen, "')'");
      code_.push_back({fn.op});
      return;
    }
    throw CompileError("unknown identifier", t.text, t.pos);
  }

  std::vector<Token> tokens_;
  std::size_t arity_;
  std::size_t pos_ = 0;
  std::vector<Instruction> code_;
};

}  // namespace detail

inline constexpr std::size_t kMaxMapArity = 4;

// Parses and validates `expression`; every error surfaces here, never when
// the program runs.
inline std::shared_ptr<const MapProgram> compile_program(const std::string& expression, std::size_t arity) {
  if (arity < 1 || arity > kMaxMapArity) {
    throw ArgumentError("map kernels take 1 to " + std::to_string(kMaxMapArity) + " inputs, got " +
                        std::to_string(arity));
  }
  detail::Parser parser(detail::tokenize(expression), arity);
  return std::make_shared<const MapProgram>(expression, arity, parser.parse());
}

}  // namespace matcha::backend
