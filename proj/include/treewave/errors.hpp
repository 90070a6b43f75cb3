#pragma once

#include <stdexcept>
#include <string>

namespace treewave {

// Base class for everything this library throws on purpose. The CLI maps
// subfamilies to distinct process exit codes.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// -- input / validity --------------------------------------------------------
struct ParseError : Error {
    using Error::Error;
};
struct SchemaError : Error {
    using Error::Error;
};
struct CycleDetected : Error {
    using Error::Error;
};
struct Disconnected : Error {
    using Error::Error;
};
struct NonpositiveDensity : Error {
    using Error::Error;
};
struct NonpositiveLength : Error {
    using Error::Error;
};
struct IndexOutOfRange : Error {
    using Error::Error;
};
struct InconsistentChannels : Error {
    using Error::Error;
};

// -- numerical breakdowns ----------------------------------------------------
struct NumericallySingular : Error {
    using Error::Error;
};
struct EigenSolverFailure : Error {
    using Error::Error;
};
struct DegenerateMassMatrix : Error {
    using Error::Error;
};

// -- resolution / stability -------------------------------------------------
struct MeshTooCoarse : Error {
    using Error::Error;
};
struct CFLViolation : Error {
    using Error::Error;
};
struct UnderresolvedQuadrature : Error {
    using Error::Error;
};

} // namespace treewave
