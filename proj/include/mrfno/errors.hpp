#pragma once

#include <stdexcept>
#include <string>

namespace mrfno {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Resolution index outside [1, R], or embedding length mismatch.
class InvalidResolutionError : public Error {
public:
    using Error::Error;
};

/// Grids are not nested / not compatible for the requested operation.
class GridMismatchError : public Error {
public:
    using Error::Error;
};

/// Metric is undefined for the given inputs (e.g. zero-norm reference).
class UndefinedMetricError : public Error {
public:
    using Error::Error;
};

/// Numerical failure inside a PDE solver (instability, singular system).
class SolverError : public Error {
public:
    using Error::Error;
};

/// Random-field covariance not positive definite after discretization.
class SamplingError : public Error {
public:
    using Error::Error;
};

/// Failure while fitting model parameters (divergence, non-finite loss).
class TrainingError : public Error {
public:
    TrainingError(const std::string& msg, long step) : Error(msg), step_index(step) {}
    long step_index = -1;
};

/// Ensemble too small for the empirical-covariance construction.
class InsufficientEnsembleError : public Error {
public:
    using Error::Error;
};

/// Requested Fourier modes do not fit on the given grid.
class ModeTruncationError : public Error {
public:
    using Error::Error;
};

/// Bad or inconsistent configuration (files, fields, ranges).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Candidate pool exhausted before the campaign finished.
class CampaignExhaustedError : public Error {
public:
    using Error::Error;
};

} // namespace mrfno
