#pragma once

#include <stdexcept>
#include <string>

namespace ccoov {

// Base of every error raised by the library. `DataError` subclasses are
// problems with user-provided inputs (files, corpora); the CLI maps them to
// exit code 2.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DataError : public Error {
public:
    using Error::Error;
};

#define CCOOV_DEFINE_ERROR(Name, Base)        \
    class Name : public Base {                \
    public:                                   \
        explicit Name(const std::string& msg) \
            : Base(#Name ": " + msg) {}       \
    };

// autodiff
CCOOV_DEFINE_ERROR(ShapeMismatch, Error)
CCOOV_DEFINE_ERROR(NonFinite, Error)
CCOOV_DEFINE_ERROR(IndexOutOfRange, Error)
CCOOV_DEFINE_ERROR(NotScalar, Error)
CCOOV_DEFINE_ERROR(DetachedTensor, Error)
CCOOV_DEFINE_ERROR(TapeConsumed, Error)

// layers / models
CCOOV_DEFINE_ERROR(EmptySequence, Error)
CCOOV_DEFINE_ERROR(EmptyCharacters, Error)
CCOOV_DEFINE_ERROR(EmptySentence, Error)
CCOOV_DEFINE_ERROR(AlignmentError, Error)

// data ingestion
CCOOV_DEFINE_ERROR(MalformedLine, DataError)
CCOOV_DEFINE_ERROR(BadFeats, DataError)
CCOOV_DEFINE_ERROR(DimensionMismatch, DataError)
CCOOV_DEFINE_ERROR(DuplicateWord, DataError)
CCOOV_DEFINE_ERROR(ParseError, DataError)
CCOOV_DEFINE_ERROR(EmptyCorpus, DataError)
CCOOV_DEFINE_ERROR(IoError, DataError)

// training / checkpoints
CCOOV_DEFINE_ERROR(DivergedLoss, Error)
CCOOV_DEFINE_ERROR(VersionMismatch, DataError)
CCOOV_DEFINE_ERROR(CorruptCheckpoint, DataError)

// evaluation / export
CCOOV_DEFINE_ERROR(NoOovTargets, DataError)

#undef CCOOV_DEFINE_ERROR

}  // namespace ccoov
