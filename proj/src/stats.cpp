#include "mimik/stats.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace mimik {

double normal_cdf(double x) {
    return 0.5 * std::erfc(-x * 0.7071067811865475244);
}

namespace {

// Acklam's rational approximation, then one Halley step against erfc.
double quantile_estimate(double p) {
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                               1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                               6.680131188771972e+01,  -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                               -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                               3.754408661907416e+00};
    const double p_low = 0.02425;

    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    if (p > 1.0 - p_low) {
        const double q = std::sqrt(-2.0 * std::log(1.0 - p));
        return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    const double q = p - 0.5;
    const double r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

}  // namespace

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        if (p == 0.0) return -std::numeric_limits<double>::infinity();
        if (p == 1.0) return std::numeric_limits<double>::infinity();
        throw std::invalid_argument("normal_quantile: p must lie in [0, 1]");
    }
    double x = quantile_estimate(p);
    // Halley refinement
    const double e = normal_cdf(x) - p;
    const double u = e * std::sqrt(2.0 * M_PI) * std::exp(0.5 * x * x);
    x -= u / (1.0 + 0.5 * x * u);
    return x;
}

double bivariate_normal_cdf(double x, double y, double r) {
    if (!(r >= -1.0 && r <= 1.0)) {
        throw std::invalid_argument("bivariate_normal_cdf: correlation must lie in [-1, 1]");
    }
    if (std::isinf(x) || std::isinf(y)) {
        if (x == -std::numeric_limits<double>::infinity() || y == -std::numeric_limits<double>::infinity())
            return 0.0;
        if (x == std::numeric_limits<double>::infinity()) return normal_cdf(y);
        return normal_cdf(x);
    }

    // Genz's bvnu computes P(X > dh, Y > dk); the CDF is bvnu(-x, -y, r).
    const double dh = -x, dk = -y;

    static const double w6[] = {0.1713244923791705, 0.3607615730481384, 0.4679139345726904};
    static const double x6[] = {0.9324695142031522, 0.6612093864662647, 0.2386191860831970};
    static const double w12[] = {0.04717533638651177, 0.1069393259953183, 0.1600783285433464,
                                 0.2031674267230659,  0.2334925365383547, 0.2491470458134029};
    static const double x12[] = {0.9815606342467191, 0.9041172563704750, 0.7699026741943050,
                                 0.5873179542866171, 0.3678314989981802, 0.1252334085114692};
    static const double w20[] = {0.01761400713915212, 0.04060142980038694, 0.06267204833410906,
                                 0.08327674157670475, 0.1019301198172404,  0.1181945319615184,
                                 0.1316886384491766,  0.1420961093183821,  0.1491729864726037,
                                 0.1527533871307259};
    static const double x20[] = {0.9931285991850949, 0.9639719272779138, 0.9122344282513259,
                                 0.8391169718222188, 0.7463319064601508, 0.6360536807265150,
                                 0.5108670019508271, 0.3737060887154196, 0.2277858511416451,
                                 0.07652652113349733};

    const double* w;
    const double* xg;
    int ng;
    if (std::abs(r) < 0.3) {
        ng = 3;
        w = w6;
        xg = x6;
    } else if (std::abs(r) < 0.75) {
        ng = 6;
        w = w12;
        xg = x12;
    } else {
        ng = 10;
        w = w20;
        xg = x20;
    }

    const double h = dh, k = dk;
    double hk = h * k;
    double bvn = 0.0;

    if (std::abs(r) < 0.925) {
        const double hs = 0.5 * (h * h + k * k);
        const double asr = std::asin(r);
        for (int i = 0; i < ng; ++i) {
            for (int is = -1; is <= 1; is += 2) {
                const double sn = std::sin(asr * (is * xg[i] + 1.0) * 0.5);
                bvn += w[i] * std::exp((sn * hk - hs) / (1.0 - sn * sn));
            }
        }
        bvn = bvn * asr / (4.0 * M_PI) + normal_cdf(-h) * normal_cdf(-k);
    } else {
        double kk = k, hh = h;
        if (r < 0.0) {
            kk = -kk;
            hk = -hk;
        }
        if (std::abs(r) < 1.0) {
            const double as = (1.0 - r) * (1.0 + r);
            double a = std::sqrt(as);
            const double bs = (hh - kk) * (hh - kk);
            const double cc = (4.0 - hk) / 8.0;
            const double dd = (12.0 - hk) / 16.0;
            double asr = -(bs / as + hk) / 2.0;
            if (asr > -100.0) {
                bvn = a * std::exp(asr) *
                      (1.0 - cc * (bs - as) * (1.0 - dd * bs / 5.0) / 3.0 + cc * dd * as * as / 5.0);
            }
            if (-hk < 100.0) {
                const double bb = std::sqrt(bs);
                bvn -= std::exp(-hk / 2.0) * std::sqrt(2.0 * M_PI) * normal_cdf(-bb / a) * bb *
                       (1.0 - cc * bs * (1.0 - dd * bs / 5.0) / 3.0);
            }
            a /= 2.0;
            for (int i = 0; i < ng; ++i) {
                for (int is = -1; is <= 1; is += 2) {
                    const double xs = a * (is * xg[i] + 1.0);
                    const double xs2 = xs * xs;
                    const double rs = std::sqrt(1.0 - xs2);
                    asr = -(bs / xs2 + hk) / 2.0;
                    if (asr > -100.0) {
                        bvn += a * w[i] * std::exp(asr) *
                               (std::exp(-hk * (1.0 - rs) / (2.0 * (1.0 + rs))) / rs -
                                (1.0 + cc * xs2 * (1.0 + dd * xs2)));
                    }
                }
            }
            bvn = -bvn / (2.0 * M_PI);
        }
        if (r > 0.0) {
            bvn += normal_cdf(-std::max(hh, kk));
        } else {
            bvn = -bvn;
            if (kk > hh) bvn += normal_cdf(kk) - normal_cdf(hh);
        }
    }
    // bvn now holds P(X > dh, Y > dk) = P(X <= x, Y <= y)
    if (bvn < 0.0) bvn = 0.0;
    if (bvn > 1.0) bvn = 1.0;
    return bvn;
}

}  // namespace mimik
