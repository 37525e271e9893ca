#ifndef HIDEC_ERRORS_HPP
#define HIDEC_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace hidec {

/// Stable error identities surfaced by the CLI and asserted in tests.
enum class Errc {
    // taxonomy
    multiple_parents,
    orphan_label,
    cyclic_taxonomy,
    unknown_label,
    invalid_format,
    // sub-hierarchy codec
    empty_label_set,
    invalid_subhierarchy,
    parse_error,
    invalid_edge,
    duplicate_label,
    // tensor / model
    shape_error,
    double_backward,
    numerical_error,
    level_overflow,
    not_a_label_position,
    unknown_token,
    // corpus / training
    empty_corpus,
    missing_labels,
    numerical_divergence,
    incompatible_checkpoint,
    taxonomy_mismatch,
    checksum_error,
    // metrics
    alignment_error,
    // datagen
    invalid_spec,
};

inline const char* errc_name(Errc c) {
    switch (c) {
        case Errc::multiple_parents: return "MultipleParents";
        case Errc::orphan_label: return "OrphanLabel";
        case Errc::cyclic_taxonomy: return "CyclicTaxonomy";
        case Errc::unknown_label: return "UnknownLabel";
        case Errc::invalid_format: return "InvalidFormat";
        case Errc::empty_label_set: return "EmptyLabelSet";
        case Errc::invalid_subhierarchy: return "InvalidSubHierarchy";
        case Errc::parse_error: return "ParseError";
        case Errc::invalid_edge: return "InvalidEdge";
        case Errc::duplicate_label: return "DuplicateLabel";
        case Errc::shape_error: return "ShapeError";
        case Errc::double_backward: return "DoubleBackward";
        case Errc::numerical_error: return "NumericalError";
        case Errc::level_overflow: return "LevelOverflow";
        case Errc::not_a_label_position: return "NotALabelPosition";
        case Errc::unknown_token: return "UnknownToken";
        case Errc::empty_corpus: return "EmptyCorpus";
        case Errc::missing_labels: return "MissingLabels";
        case Errc::numerical_divergence: return "NumericalDivergence";
        case Errc::incompatible_checkpoint: return "IncompatibleCheckpoint";
        case Errc::taxonomy_mismatch: return "TaxonomyMismatch";
        case Errc::checksum_error: return "ChecksumError";
        case Errc::alignment_error: return "AlignmentError";
        case Errc::invalid_spec: return "InvalidSpec";
    }
    return "UnknownError";
}

/// Library-wide exception carrying a stable error code.
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message)
        : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

[[noreturn]] inline void raise(Errc code, const std::string& message) {
    throw Error(code, message);
}

}  // namespace hidec

#endif  // HIDEC_ERRORS_HPP
