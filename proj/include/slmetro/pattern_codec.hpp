#pragma once

#include <cstdint>
#include <vector>

#include "slmetro/errors.hpp"
#include "slmetro/image.hpp"

namespace slmetro {

enum class FrameRole : uint8_t { GrayBit, GrayComplement, StripeShift };

struct FrameMeta {
    FrameRole role;
    int index; // bit position (MSB first) or shift index
};

// Projected pattern sequence: Gray bit frames (MSB first), their
// complements, then the shifted stripe frames.
struct PatternStack {
    int width = 0;
    int height = 0;
    std::vector<Image8> frames;
    std::vector<FrameMeta> meta;
};

// Camera-side capture of a pattern sequence; same layout as PatternStack
// but at camera resolution.
struct CaptureStack {
    std::vector<Image8> frames;
    std::vector<FrameMeta> meta;
};

struct CodecConfig {
    int proj_width = 1280;
    int proj_height = 720;
    int stripe_period = 16; // pixels, >= 4
    int n_shifts = 4;       // >= 3
    double contrast_threshold = 5.0; // counts; below this a Gray bit is low-confidence
    double min_amplitude = 8.0;      // counts; minimum stripe modulation for a valid pixel
};

struct CorrespondenceMap {
    int width = 0;
    int height = 0;
    std::vector<double> proj_col; // fractional projector column, valid pixels only
    std::vector<uint8_t> valid;

    CorrespondenceMap() = default;
    CorrespondenceMap(int w, int h)
        : width(w), height(h), proj_col(static_cast<size_t>(w) * h, 0.0),
          valid(static_cast<size_t>(w) * h, 0) {}
};

struct BinarizeResult {
    Image8 bit;       // 0 or 1
    Image8 confident; // 0 or 1
};

// Reflected binary Gray code and its inverse.
uint32_t int_to_gray(uint32_t n);
uint32_t gray_to_int(uint32_t g);

// Number of Gray bit frames for a config.
int gray_bit_count(const CodecConfig &cfg);

PatternStack generate_patterns(const CodecConfig &cfg);

// bit = frame > complement; low confidence where |frame - complement| is
// below the contrast threshold.
BinarizeResult binarize(const Image8 &frame, const Image8 &complement,
                        double contrast_threshold);

// Per-pixel fractional projector column from a captured sequence.
// Throws StackMismatch when the stack layout disagrees with cfg.
CorrespondenceMap decode(const CaptureStack &captured, const CodecConfig &cfg);

} // namespace slmetro
