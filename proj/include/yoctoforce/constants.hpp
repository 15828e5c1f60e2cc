#pragma once

// Physical constants (SI) and a few numeric knobs shared across the library.

namespace yf {

inline constexpr double pi = 3.141592653589793238462643383279502884;
inline constexpr double two_pi = 2.0 * pi;

// Reduced Planck constant [J s] (2019 SI exact value of h over 2 pi).
inline constexpr double hbar = 1.054571817e-34;

// Speed of light [m/s].
inline constexpr double c_light = 299792458.0;

// Mass of one 87Rb atom [kg].
inline constexpr double m_rb87 = 1.44316e-25;

// Conventional standard gravity [m/s^2] used for acceleration-equivalent scales.
inline constexpr double g_standard = 9.81;

// Convert a linear frequency in Hz to angular frequency in rad/s and back.
inline constexpr double hz_to_rad(double f_hz) { return two_pi * f_hz; }
inline constexpr double rad_to_hz(double w) { return w / two_pi; }

// yN^2/Hz per N^2/Hz (1 yN = 1e-24 N).
inline constexpr double n2_to_yn2 = 1e48;

} // namespace yf
