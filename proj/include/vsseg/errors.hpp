#pragma once

#include <stdexcept>
#include <string>

namespace vsseg {

// Base class for everything this library throws on contract violations.
struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

struct ShapeMismatch : Error {
    explicit ShapeMismatch(const std::string& what) : Error("ShapeMismatch: " + what) {}
};

struct IllegalLabelValue : Error {
    explicit IllegalLabelValue(const std::string& what) : Error("IllegalLabelValue: " + what) {}
};

struct MissingFrames : Error {
    explicit MissingFrames(const std::string& what) : Error("MissingFrames: " + what) {}
};

struct MixedResolution : Error {
    explicit MixedResolution(const std::string& what) : Error("MixedResolution: " + what) {}
};

struct EmptyDataset : Error {
    explicit EmptyDataset(const std::string& what) : Error("EmptyDataset: " + what) {}
};

struct PatientLeak : Error {
    explicit PatientLeak(const std::string& what) : Error("PatientLeak: " + what) {}
};

struct PatchTooLarge : Error {
    explicit PatchTooLarge(const std::string& what) : Error("PatchTooLarge: " + what) {}
};

struct EmptyPool : Error {
    explicit EmptyPool(const std::string& what) : Error("EmptyPool: " + what) {}
};

struct SingleClassGroundTruth : Error {
    explicit SingleClassGroundTruth(const std::string& what) : Error("SingleClassGroundTruth: " + what) {}
};

struct EmptyGroundTruth : Error {
    explicit EmptyGroundTruth(const std::string& what) : Error("EmptyGroundTruth: " + what) {}
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& what) : Error("ConfigError: " + what) {}
};

struct IoError : Error {
    explicit IoError(const std::string& what) : Error("IoError: " + what) {}
};

}  // namespace vsseg
