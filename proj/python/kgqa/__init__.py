"""Knowledge-graph question answering via executable action sequences."""

from _kgqa import (  # noqa: F401
    ActionSequence,
    Answer,
    ArgumentSet,
    Artifact,
    KgqaError,
    KnowledgeGraph,
    Pipeline,
    QuestionRecord,
    __version__,
    execute,
    f1,
    generate_benchmark,
    load_dataset,
    mask_question,
    parse_sequence,
    search_pseudo_sequences,
    serialize_sequence,
    similarity,
    type_check,
)
