#include "cdanse/quadrature.hpp"

#include <array>

namespace cdanse {

namespace {

// Degree-5 seven-point symmetric rule (weights normalized to sum to 1/2).
constexpr double kA1 = 0.059715871789769820;
constexpr double kB1 = 0.470142064105115090;
constexpr double kW1 = 0.066197076394253090;  // = 0.132394152788506180 / 2
constexpr double kA2 = 0.797426985353087320;
constexpr double kB2 = 0.101286507323456340;
constexpr double kW2 = 0.062969590272413576;  // = 0.125939180544827150 / 2

constexpr std::array<QuadPoint, 7> kDegree5 = {{
    {1.0 / 3.0, 1.0 / 3.0, 0.1125},
    {kA1, kB1, kW1},
    {kB1, kA1, kW1},
    {kB1, kB1, kW1},
    {kA2, kB2, kW2},
    {kB2, kA2, kW2},
    {kB2, kB2, kW2},
}};

// Conical product of 4-point Gauss-Legendre and 4-point Gauss-Jacobi(1,0),
// exact for total degree 7 on the reference triangle.
constexpr std::array<QuadPoint, 16> kDegree7 = {{
    {6.54669945550144516e-02, 5.71041961145177246e-02, 2.35683681933823996e-02},
    {5.02101232113697782e-02, 2.76843013638123803e-01, 3.53880678980858926e-02},
    {2.89120842243890119e-02, 5.83590432368916834e-01, 2.25840492823699071e-02},
    {9.70378512694610937e-03, 8.60240135656219485e-01, 5.42322591052525355e-03},
    {3.11164552244357018e-01, 5.71041961145177246e-02, 4.41850885223618595e-02},
    {2.38648659731442919e-01, 2.76843013638123803e-01, 6.63442161070496583e-02},
    {1.37419104134574366e-01, 5.83590432368916834e-01, 4.23397245217462595e-02},
    {4.61220799064520348e-02, 8.60240135656219485e-01, 1.01672595644787880e-02},
    {6.31731251641125202e-01, 5.71041961145177246e-02, 4.41850885223618595e-02},
    {4.84508326630433250e-01, 2.76843013638123803e-01, 6.63442161070496583e-02},
    {2.78990463496508800e-01, 5.83590432368916834e-01, 4.23397245217462595e-02},
    {9.36377844373284807e-02, 8.60240135656219485e-01, 1.01672595644787880e-02},
    {8.77428809330467741e-01, 5.71041961145177246e-02, 2.35683681933823996e-02},
    {6.72946863150506336e-01, 2.76843013638123803e-01, 3.53880678980858926e-02},
    {3.87497483406694154e-01, 5.83590432368916834e-01, 2.25840492823699071e-02},
    {1.30056079216834403e-01, 8.60240135656219485e-01, 5.42322591052525355e-03},
}};

}  // namespace

std::span<const QuadPoint> triangle_rule_degree5() { return kDegree5; }
std::span<const QuadPoint> triangle_rule_degree7() { return kDegree7; }

}  // namespace cdanse
