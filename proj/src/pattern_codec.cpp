#include "slmetro/pattern_codec.hpp"

#include <cmath>
#include <complex>
#include <string>

namespace slmetro {

namespace {

// Under linear pattern resampling a binarized Gray edge crosses half a
// pixel before the stripe boundary; the fusion step compensates.
constexpr double kGrayEdgeOffset = 0.5;

int stripe_count(const CodecConfig &cfg) {
    return (cfg.proj_width + cfg.stripe_period - 1) / cfg.stripe_period;
}

void validate_config(const CodecConfig &cfg) {
    if (cfg.proj_width <= 0 || cfg.proj_height <= 0)
        throw InvalidConfig("proj_width/proj_height must be positive");
    if (cfg.stripe_period < 4)
        throw InvalidConfig("stripe_period must be >= 4 px");
    if (cfg.n_shifts < 3)
        throw InvalidConfig("n_shifts must be >= 3");
}

uint8_t stripe_value(const CodecConfig &cfg, int c, int shift) {
    double phase = 2.0 * M_PI * (static_cast<double>(c) / cfg.stripe_period -
                                 static_cast<double>(shift) / cfg.n_shifts);
    return quantize8(127.5 + 127.5 * std::cos(phase));
}

// Demodulated fundamental of the known stripe patterns, linearly
// resampled at fractional in-period position f.
std::complex<double> model_fundamental(const CodecConfig &cfg,
                                       const std::vector<std::vector<double>> &table,
                                       double f) {
    int p = cfg.stripe_period;
    int i = static_cast<int>(f);
    if (i >= p)
        i = p - 1;
    double t = f - i;
    std::complex<double> acc(0.0, 0.0);
    for (int s = 0; s < cfg.n_shifts; ++s) {
        double v = (1.0 - t) * table[s][i] + t * table[s][i + 1];
        double ang = 2.0 * M_PI * s / cfg.n_shifts;
        acc += v * std::complex<double>(std::cos(ang), std::sin(ang));
    }
    return acc;
}

double wrap_2pi(double a) {
    if (a < 0)
        a += 2.0 * M_PI;
    if (a >= 2.0 * M_PI)
        a -= 2.0 * M_PI;
    return a;
}

} // namespace

uint32_t int_to_gray(uint32_t n) { return n ^ (n >> 1); }

uint32_t gray_to_int(uint32_t g) {
    uint32_t n = g;
    for (uint32_t shift = 1; shift < 32; shift <<= 1)
        n ^= n >> shift;
    return n;
}

int gray_bit_count(const CodecConfig &cfg) {
    int stripes = stripe_count(cfg);
    int bits = 0;
    while ((1 << bits) < stripes)
        ++bits;
    return bits > 0 ? bits : 1;
}

PatternStack generate_patterns(const CodecConfig &cfg) {
    validate_config(cfg);
    int bits = gray_bit_count(cfg);

    PatternStack stack;
    stack.width = cfg.proj_width;
    stack.height = cfg.proj_height;

    auto fill_columns = [&](const std::vector<uint8_t> &col) {
        Image8 img(cfg.proj_width, cfg.proj_height);
        for (int y = 0; y < cfg.proj_height; ++y)
            for (int x = 0; x < cfg.proj_width; ++x)
                img.at(x, y) = col[x];
        return img;
    };

    std::vector<uint8_t> col(cfg.proj_width);
    for (int b = 0; b < bits; ++b) {
        int bitpos = bits - 1 - b; // MSB first
        for (int x = 0; x < cfg.proj_width; ++x) {
            uint32_t g = int_to_gray(static_cast<uint32_t>(x / cfg.stripe_period));
            col[x] = ((g >> bitpos) & 1u) ? 255 : 0;
        }
        stack.frames.push_back(fill_columns(col));
        stack.meta.push_back({FrameRole::GrayBit, b});
    }
    for (int b = 0; b < bits; ++b) {
        int bitpos = bits - 1 - b;
        for (int x = 0; x < cfg.proj_width; ++x) {
            uint32_t g = int_to_gray(static_cast<uint32_t>(x / cfg.stripe_period));
            col[x] = ((g >> bitpos) & 1u) ? 0 : 255;
        }
        stack.frames.push_back(fill_columns(col));
        stack.meta.push_back({FrameRole::GrayComplement, b});
    }
    for (int s = 0; s < cfg.n_shifts; ++s) {
        for (int x = 0; x < cfg.proj_width; ++x)
            col[x] = stripe_value(cfg, x, s);
        stack.frames.push_back(fill_columns(col));
        stack.meta.push_back({FrameRole::StripeShift, s});
    }
    return stack;
}

BinarizeResult binarize(const Image8 &frame, const Image8 &complement,
                        double contrast_threshold) {
    if (frame.width != complement.width || frame.height != complement.height)
        throw InvalidConfig("binarize: frame sizes differ");
    BinarizeResult out{Image8(frame.width, frame.height), Image8(frame.width, frame.height)};
    for (size_t i = 0; i < frame.pixels.size(); ++i) {
        int diff = static_cast<int>(frame.pixels[i]) - static_cast<int>(complement.pixels[i]);
        out.bit.pixels[i] = diff > 0 ? 1 : 0;
        out.confident.pixels[i] = std::abs(diff) >= contrast_threshold ? 1 : 0;
    }
    return out;
}

CorrespondenceMap decode(const CaptureStack &captured, const CodecConfig &cfg) {
    validate_config(cfg);
    int bits = gray_bit_count(cfg);
    size_t expected = static_cast<size_t>(2 * bits + cfg.n_shifts);
    if (captured.frames.size() != expected || captured.meta.size() != expected)
        throw StackMismatch("expected " + std::to_string(expected) + " frames, got " +
                            std::to_string(captured.frames.size()));
    for (int b = 0; b < bits; ++b) {
        if (captured.meta[b].role != FrameRole::GrayBit || captured.meta[b].index != b)
            throw StackMismatch("frame " + std::to_string(b) + " is not Gray bit " +
                                std::to_string(b));
        const auto &m = captured.meta[bits + b];
        if (m.role != FrameRole::GrayComplement || m.index != b)
            throw StackMismatch("frame " + std::to_string(bits + b) +
                                " is not Gray complement " + std::to_string(b));
    }
    for (int s = 0; s < cfg.n_shifts; ++s) {
        const auto &m = captured.meta[2 * bits + s];
        if (m.role != FrameRole::StripeShift || m.index != s)
            throw StackMismatch("frame " + std::to_string(2 * bits + s) +
                                " is not stripe shift " + std::to_string(s));
    }
    int w = captured.frames[0].width, h = captured.frames[0].height;
    for (const auto &f : captured.frames)
        if (f.width != w || f.height != h)
            throw StackMismatch("captured frames have inconsistent sizes");

    int p = cfg.stripe_period;
    int stripes = stripe_count(cfg);

    // Known quantized stripe profiles over one period (wrapping column).
    std::vector<std::vector<double>> table(cfg.n_shifts, std::vector<double>(p + 1));
    for (int s = 0; s < cfg.n_shifts; ++s) {
        for (int c = 0; c < p; ++c)
            table[s][c] = stripe_value(cfg, c, s);
        table[s][p] = table[s][0];
    }
    std::complex<double> model0 = model_fundamental(cfg, table, 0.0);

    CorrespondenceMap map(w, h);
    std::vector<double> cs(cfg.n_shifts), sn(cfg.n_shifts);
    for (int s = 0; s < cfg.n_shifts; ++s) {
        cs[s] = std::cos(2.0 * M_PI * s / cfg.n_shifts);
        sn[s] = std::sin(2.0 * M_PI * s / cfg.n_shifts);
    }

    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            size_t idx = static_cast<size_t>(y) * w + x;

            // Gray coarse index; tolerate a single low-confidence bit (a
            // pixel straddling one stripe edge), the phase fusion absorbs
            // the resulting +-1 stripe error.
            uint32_t code = 0;
            int low_conf = 0;
            for (int b = 0; b < bits; ++b) {
                int fv = captured.frames[b].pixels[idx];
                int cv = captured.frames[bits + b].pixels[idx];
                int diff = fv - cv;
                if (std::abs(diff) < cfg.contrast_threshold)
                    ++low_conf;
                code = (code << 1) | (diff > 0 ? 1u : 0u);
            }
            if (low_conf > 1)
                continue;
            uint32_t k = gray_to_int(code);
            if (static_cast<int>(k) >= stripes)
                continue;

            // Stripe fundamental from the captured intensities.
            double re = 0.0, im = 0.0;
            for (int s = 0; s < cfg.n_shifts; ++s) {
                double v = captured.frames[2 * bits + s].pixels[idx];
                re += v * cs[s];
                im += v * sn[s];
            }
            std::complex<double> obs(re, im);
            if (2.0 * std::abs(obs) / cfg.n_shifts < cfg.min_amplitude)
                continue;

            // Invert the resampled stripe profile: find f in [0, p) whose
            // model phase matches the observed phase. The relative phase
            // grows monotonically from 0 to 2*pi over one period.
            double target = wrap_2pi(std::arg(obs * std::conj(model0)));
            double lo = 0.0, hi = p;
            for (int it = 0; it < 52; ++it) {
                double mid = 0.5 * (lo + hi);
                double g = wrap_2pi(
                    std::arg(model_fundamental(cfg, table, mid) * std::conj(model0)));
                if (g < target)
                    lo = mid;
                else
                    hi = mid;
            }
            double f = 0.5 * (lo + hi);

            // Fuse coarse stripe index with subpixel phase.
            double center = k * p + 0.5 * p - kGrayEdgeOffset;
            double m = std::round((center - f) / p);
            double col = m * p + f;
            if (col < 0.0 || col >= cfg.proj_width)
                continue;
            map.proj_col[idx] = col;
            map.valid[idx] = 1;
        }
    }
    return map;
}

} // namespace slmetro
