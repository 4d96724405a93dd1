#pragma once

#include <stdexcept>
#include <string>

namespace lgfa {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Input does not follow the file schema (missing field, wrong type, unknown class).
struct SchemaError : Error {
  using Error::Error;
};

// Geometry violates a type invariant (too few vertices, non-finite coordinate).
struct GeometryError : Error {
  using Error::Error;
};

struct EmptyInput : Error {
  using Error::Error;
};

struct ClassMismatch : Error {
  using Error::Error;
};

struct DegenerateMerge : Error {
  using Error::Error;
};

struct DegenerateGeometry : Error {
  using Error::Error;
};

struct InsufficientInput : Error {
  using Error::Error;
};

struct DegenerateScale : Error {
  using Error::Error;
};

struct SpecError : Error {
  using Error::Error;
};

struct EmptyAggregate : Error {
  using Error::Error;
};

namespace detail {

template <class E, class... Rest>
[[noreturn]] void rethrow_as(const Error& e, const std::string& context) {
  if (dynamic_cast<const E*>(&e) != nullptr) throw E(context + ": " + e.what());
  if constexpr (sizeof...(Rest) > 0) {
    rethrow_as<Rest...>(e, context);
  } else {
    throw Error(context + ": " + e.what());
  }
}

}  // namespace detail

/// Runs fn; an lgfa::Error escaping it is rethrown with the same type and a context prefix.
template <class Fn>
decltype(auto) with_context(const std::string& context, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    detail::rethrow_as<SchemaError, GeometryError, EmptyInput, ClassMismatch, DegenerateMerge, DegenerateGeometry,
                       InsufficientInput, DegenerateScale, SpecError, EmptyAggregate>(e, context);
  }
}

/// Input errors map to exit status 2, numerical failures to 3.
inline bool is_input_error(const Error& e) {
  return dynamic_cast<const SchemaError*>(&e) != nullptr || dynamic_cast<const GeometryError*>(&e) != nullptr ||
         dynamic_cast<const SpecError*>(&e) != nullptr;
}

}  // namespace lgfa
