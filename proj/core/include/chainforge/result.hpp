#pragma once

#include <cassert>
#include <utility>
#include <variant>

namespace chainforge {

/// Wraps an error value so `Result<T, E>` can be built from it unambiguously.
template <typename E>
struct Unexpected {
    E error;
};

template <typename E>
Unexpected<std::decay_t<E>> fail(E&& error) {
    return {std::forward<E>(error)};
}

/// Minimal value-or-error holder. Used wherever a failure is ordinary data
/// (parse errors, backend errors) rather than a programming mistake.
template <typename T, typename E>
class Result {
  public:
    Result(T value) : storage_(std::in_place_index<0>, std::move(value)) {}
    Result(Unexpected<E> err) : storage_(std::in_place_index<1>, std::move(err.error)) {}

    bool ok() const noexcept { return storage_.index() == 0; }
    explicit operator bool() const noexcept { return ok(); }

    const T& value() const& {
        assert(ok());
        return std::get<0>(storage_);
    }
    T& value() & {
        assert(ok());
        return std::get<0>(storage_);
    }
    T&& value() && {
        assert(ok());
        return std::get<0>(std::move(storage_));
    }

    const E& error() const& {
        assert(!ok());
        return std::get<1>(storage_);
    }
    E&& error() && {
        assert(!ok());
        return std::get<1>(std::move(storage_));
    }

    const T* operator->() const { return &value(); }
    T* operator->() { return &value(); }
    const T& operator*() const& { return value(); }
    T& operator*() & { return value(); }
    T&& operator*() && { return std::move(*this).value(); }

  private:
    std::variant<T, E> storage_;
};

}  // namespace chainforge
