#pragma once

#include <complex>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

// Little-endian scalar I/O shared by the field, matrix and amplitude formats.
namespace potrec::binio {

static_assert(sizeof(double) == 8);

inline bool host_is_little() {
    const std::uint16_t one = 1;
    unsigned char b;
    std::memcpy(&b, &one, 1);
    return b == 1;
}

template <class T>
void put(std::ostream& os, T v) {
    unsigned char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    if (!host_is_little())
        for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(buf[i], buf[sizeof(T) - 1 - i]);
    os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <class T>
T get(std::istream& is) {
    unsigned char buf[sizeof(T)];
    is.read(reinterpret_cast<char*>(buf), sizeof(T));
    if (!is) throw std::runtime_error("truncated binary file");
    if (!host_is_little())
        for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(buf[i], buf[sizeof(T) - 1 - i]);
    T v;
    std::memcpy(&v, buf, sizeof(T));
    return v;
}

inline void put_complex(std::ostream& os, const std::complex<double>& z) {
    put(os, z.real());
    put(os, z.imag());
}

inline std::complex<double> get_complex(std::istream& is) {
    const double re = get<double>(is);
    const double im = get<double>(is);
    return {re, im};
}

inline void put_magic(std::ostream& os, const char (&m)[5]) { os.write(m, 4); }

inline bool check_magic(std::istream& is, const char (&m)[5]) {
    char buf[4];
    is.read(buf, 4);
    return is && std::memcmp(buf, m, 4) == 0;
}

}  // namespace potrec::binio
