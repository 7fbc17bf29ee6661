#pragma once

#include <stdexcept>
#include <string>

namespace slmetro {

// Base class for all library errors.
class Error : public std::runtime_error {
  public:
    explicit Error(const std::string &msg) : std::runtime_error(msg) {}
};

// Iterative undistortion failed to reach tolerance.
class NonConvergence : public Error {
  public:
    using Error::Error;
};

// Point has non-positive depth in the camera frame.
class BehindCamera : public Error {
  public:
    using Error::Error;
};

class RayParallelToPlane : public Error {
  public:
    using Error::Error;
};

class DegenerateRays : public Error {
  public:
    using Error::Error;
};

// Rotation matrix fails orthonormality / determinant checks.
class InvalidPose : public Error {
  public:
    using Error::Error;
};

class InvalidConfig : public Error {
  public:
    using Error::Error;
};

// Capture stack layout disagrees with the codec configuration.
class StackMismatch : public Error {
  public:
    using Error::Error;
};

// Input point set is insufficient or rank-deficient for the fit.
class DegenerateInput : public Error {
  public:
    using Error::Error;
};

class EmptySamples : public Error {
  public:
    using Error::Error;
};

class EmptyTrials : public Error {
  public:
    using Error::Error;
};

class InsufficientMarkers : public Error {
  public:
    using Error::Error;
};

class NoBlockFound : public Error {
  public:
    using Error::Error;
};

class NoBallsFound : public Error {
  public:
    using Error::Error;
};

class OutOfWorkingRange : public Error {
  public:
    using Error::Error;
};

class InvalidKernel : public Error {
  public:
    using Error::Error;
};

class IoError : public Error {
  public:
    using Error::Error;
};

} // namespace slmetro
