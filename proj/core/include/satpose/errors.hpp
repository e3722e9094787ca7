#ifndef SATPOSE_ERRORS_HPP
#define SATPOSE_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace satpose {

/// Base class for all satpose errors.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// A caller-supplied value violates a precondition.
class InvalidInputError : public Error {
public:
  explicit InvalidInputError(const std::string& msg) : Error(msg) {}
};

/// Array or tensor dimensions do not match.
class ShapeError : public InvalidInputError {
public:
  explicit ShapeError(const std::string& msg) : InvalidInputError(msg) {}
};

/// A configuration value is inconsistent (e.g. anchor count vs. stage count).
class ConfigError : public InvalidInputError {
public:
  explicit ConfigError(const std::string& msg) : InvalidInputError(msg) {}
};

/// A 3D point has non-positive depth in the camera frame.
class BehindCameraError : public InvalidInputError {
public:
  BehindCameraError(const std::string& msg, int point_index)
      : InvalidInputError(msg), index(point_index) {}
  int index;
};

/// A keypoint is seen in too few images for its depth to be determined.
class UnobservablePointError : public InvalidInputError {
public:
  UnobservablePointError(const std::string& msg, int point_index)
      : InvalidInputError(msg), index(point_index) {}
  int index;
};

/// The input geometry is rank-deficient (collinear points, repeated poses, ...).
class DegenerateGeometryError : public Error {
public:
  explicit DegenerateGeometryError(const std::string& msg) : Error(msg) {}
};

/// Fewer than the minimum number of 2D-3D correspondences.
class InsufficientCorrespondencesError : public InvalidInputError {
public:
  explicit InsufficientCorrespondencesError(const std::string& msg)
      : InvalidInputError(msg) {}
};

/// Every pose candidate places the model behind the camera.
class NoValidPoseError : public Error {
public:
  explicit NoValidPoseError(const std::string& msg) : Error(msg) {}
};

/// Covariance matrix is not symmetric positive semi-definite within tolerance.
class InvalidCovarianceError : public InvalidInputError {
public:
  explicit InvalidCovarianceError(const std::string& msg) : InvalidInputError(msg) {}
};

/// File could not be read, written, or parsed.
class IoError : public Error {
public:
  explicit IoError(const std::string& msg) : Error(msg) {}
};

}  // namespace satpose

#endif  // SATPOSE_ERRORS_HPP
