#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "gblab/errors.hpp"
#include "gblab/lattice.hpp"

namespace gblab {

// Binary dump layout (little-endian):
//   lambda f64 | K f64 | modes u64 | rows u64 | rows * modes (re, im) f64 pairs, row-major.
// rows = 0 marks a single spectral field (one row of data follows).
// Spacetime spectra store their tau count, trajectories their time count.

struct SpectrumDump {
  double lambda = 1.0;
  double K = 1.0;
  std::uint64_t modes = 0;
  std::uint64_t rows = 0;  // 0 for a single field
  std::vector<cplx> data;

  std::size_t row_count() const { return rows == 0 ? 1 : static_cast<std::size_t>(rows); }
};

namespace detail {

inline std::uint64_t to_le(std::uint64_t x) {
  if constexpr (std::endian::native == std::endian::little) return x;
  std::uint64_t y = 0;
  for (int i = 0; i < 8; ++i) y |= ((x >> (8 * i)) & 0xFFu) << (8 * (7 - i));
  return y;
}

inline void put_u64(std::ostream& os, std::uint64_t x) {
  x = to_le(x);
  os.write(reinterpret_cast<const char*>(&x), 8);
}
inline void put_f64(std::ostream& os, double d) { put_u64(os, std::bit_cast<std::uint64_t>(d)); }

inline std::uint64_t get_u64(std::istream& is) {
  std::uint64_t x = 0;
  if (!is.read(reinterpret_cast<char*>(&x), 8)) throw InvalidArgument("spectrum dump: truncated file");
  return to_le(x);
}
inline double get_f64(std::istream& is) { return std::bit_cast<double>(get_u64(is)); }

inline void write_rows(std::ostream& os, const FrequencyLattice& lat, std::uint64_t rows, const std::vector<cplx>& data) {
  put_f64(os, lat.lambda());
  put_f64(os, lat.K());
  put_u64(os, lat.modes());
  put_u64(os, rows);
  for (const auto& c : data) {
    put_f64(os, c.real());
    put_f64(os, c.imag());
  }
  if (!os) throw std::runtime_error("spectrum dump: write failed");
}

}  // namespace detail

inline void write_spectrum(std::ostream& os, const SpectralField& f) { detail::write_rows(os, f.lattice, 0, f.coeff); }
inline void write_spectrum(std::ostream& os, const SpacetimeSpectrum& U) {
  detail::write_rows(os, U.lattice, U.taus(), U.coeff);
}
inline void write_spectrum(std::ostream& os, const Trajectory& tr) { detail::write_rows(os, tr.lattice, tr.count, tr.data); }

template <class T>
void write_spectrum_file(const std::filesystem::path& p, const T& x) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + p.string() + " for writing");
  write_spectrum(os, x);
}

inline SpectrumDump read_spectrum(std::istream& is) {
  SpectrumDump d;
  d.lambda = detail::get_f64(is);
  d.K = detail::get_f64(is);
  d.modes = detail::get_u64(is);
  d.rows = detail::get_u64(is);
  if (d.modes == 0 || d.modes > (1ULL << 32)) throw InvalidArgument("spectrum dump: implausible mode count");
  if (d.rows > (1ULL << 32)) throw InvalidArgument("spectrum dump: implausible row count");
  const std::size_t n = d.row_count() * static_cast<std::size_t>(d.modes);
  d.data.resize(n);
  for (auto& c : d.data) {
    const double re = detail::get_f64(is);
    c = cplx{re, detail::get_f64(is)};
  }
  if (is.peek() != std::char_traits<char>::eof()) throw InvalidArgument("spectrum dump: trailing bytes");
  return d;
}

inline SpectrumDump read_spectrum_file(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  if (!is) throw InvalidArgument("cannot open spectrum dump " + p.string());
  return read_spectrum(is);
}

inline FrequencyLattice lattice_of(const SpectrumDump& d) {
  auto lat = make_lattice(d.lambda, d.K);
  if (lat.modes() != d.modes) throw InvalidArgument("spectrum dump: mode count does not match (lambda, K)");
  return lat;
}

inline SpectralField field_of(const SpectrumDump& d, std::size_t row = 0) {
  const auto lat = lattice_of(d);
  if (row >= d.row_count()) throw InvalidArgument("spectrum dump: row out of range");
  const auto first = d.data.begin() + static_cast<long>(row * d.modes);
  return SpectralField(lat, std::vector<cplx>(first, first + static_cast<long>(d.modes)));
}

inline SpacetimeSpectrum spacetime_of(const SpectrumDump& d, double dtau, double center = 0.0) {
  if (d.rows == 0) throw InvalidArgument("spectrum dump: holds a single field, not a spacetime spectrum");
  SpacetimeSpectrum U(lattice_of(d), TauGrid{static_cast<std::size_t>(d.rows), dtau, center});
  U.coeff = d.data;
  return U;
}

inline Trajectory trajectory_of(const SpectrumDump& d, double t_start, double dt) {
  if (d.rows == 0) throw InvalidArgument("spectrum dump: holds a single field, not a trajectory");
  Trajectory tr(lattice_of(d), t_start, dt, static_cast<std::size_t>(d.rows));
  tr.data = d.data;
  return tr;
}

}  // namespace gblab
