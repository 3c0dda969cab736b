#pragma once

#include <stdexcept>
#include <string>

namespace versenet {

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// network
struct EmptyGroup : Error { using Error::Error; };
struct SizeMismatch : Error { using Error::Error; };
struct UnknownAgent : Error { using Error::Error; };
struct InsufficientPeers : Error { using Error::Error; };

// corpus
struct ParseError : Error { using Error::Error; };
struct EmptyCorpus : Error { using Error::Error; };
struct SubsetTooLarge : Error { using Error::Error; };
struct EmbeddingFailure : Error { using Error::Error; };

// lm / finetune
struct DivergenceDetected : Error { using Error::Error; };
struct EmptyTrainingSet : Error { using Error::Error; };
struct ZeroEmbedding : Error { using Error::Error; };
struct UnknownProvenance : Error { using Error::Error; };
struct UnsupportedLoss : Error { using Error::Error; };
struct NonFiniteLoss : Error { using Error::Error; };

// decoding
struct EmptyAntiExperts : Error { using Error::Error; };
struct NonFiniteLogit : Error { using Error::Error; };
struct EmptyGeneration : Error { using Error::Error; };

// prompting / transport
struct EmptyResponse : Error { using Error::Error; };
struct AuthError : Error { using Error::Error; };
struct RateLimited : Error { using Error::Error; };
struct MalformedResponse : Error { using Error::Error; };
struct TransportError : Error { using Error::Error; };

// metrics and render preconditions
struct EmptyInput : Error { using Error::Error; };
struct MissingReference : Error { using Error::Error; };
struct DegeneratePool : Error { using Error::Error; };
struct MisalignedRuns : Error { using Error::Error; };

// harness
struct ConfigError : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };
struct SchemaVersionMismatch : Error { using Error::Error; };

}  // namespace versenet
