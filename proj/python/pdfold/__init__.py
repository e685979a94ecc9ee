"""RNA secondary structure prediction with a learned score network and an
unrolled primal-dual decoder."""

from pdfold._core import (  # noqa: F401
    BASE_ORDER,
    Model,
    StructureRecord,
    __version__,
    constraint_mask,
    dot_bracket_annotation,
    exact_decode,
    f1_loss,
    is_pseudoknotted,
    make_record,
    nested_decode,
    one_hot,
    pair_transform,
    parse_bpseq,
    parse_ct,
    parse_dot_bracket,
    parse_fasta,
    prf,
    round_structure,
    serialize_bpseq,
    serialize_ct,
    solve,
    to_dot_bracket,
    unroll,
    validate_structure,
    weighted_bce,
)
