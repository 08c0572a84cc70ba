"""Deterministic text normalization with exact offset provenance.

Every normalization pass records its edits as an :class:`OffsetMap`, a
piecewise correspondence between the original and the cleaned text.
Segments tile both texts without gaps or overlaps, so any character span
can be projected from one side to the other. Projection is exact over
``copy`` segments; a span that partially covers an edited segment expands
to the smallest containing span on the other side, and a span that falls
entirely inside deleted material projects to nothing.

The pass list is fixed and individually toggleable:

1. ``nfc``          - Unicode NFC normalization
2. ``whitespace``   - collapse runs of spaces and tabs to one space
3. ``dehyphenate``  - join hyphenated line breaks before a lowercase letter
4. ``newlines``     - single line breaks inside paragraphs become spaces,
                      blank lines are kept as paragraph breaks
5. ``bullets``      - bullet glyphs (the bullet dot and the en dash) become
                      a hyphen plus space
6. ``staging``      - insert a space where a pTNM staging token is glued to
                      the preceding word (estadiopT1 -> estadio pT1, while
                      pT1N0M0 alone is left intact)

Running the pipeline on its own output is the identity: each pass reaches
a fixed point and no pass reintroduces material for an earlier one.
"""

from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass
from typing import Callable, Sequence

from .corpus import Span
from .errors import DataError

COPY = "copy"
REPLACE = "replace"
DELETE = "delete"  # present in the original, absent from the clean text
INSERT = "insert"  # absent from the original, present in the clean text

KINDS = (COPY, REPLACE, DELETE, INSERT)


@dataclass(frozen=True)
class Segment:
    """One tile of the correspondence between clean and original text."""

    clean_start: int
    clean_end: int
    orig_start: int
    orig_end: int
    kind: str


@dataclass(frozen=True)
class OffsetMap:
    """Piecewise monotone mapping between original and clean coordinates."""

    segments: tuple[Segment, ...]
    orig_length: int
    clean_length: int

    @classmethod
    def identity(cls, length: int) -> "OffsetMap":
        if length == 0:
            return cls((), 0, 0)
        return cls((Segment(0, length, 0, length, COPY),), length, length)

    @property
    def is_identity(self) -> bool:
        return all(seg.kind == COPY for seg in self.segments)

    def check(self) -> None:
        """Raise DataError unless the segments tile both texts exactly."""
        clean_pos = 0
        orig_pos = 0
        for seg in self.segments:
            if seg.kind not in KINDS:
                raise DataError(f"unknown segment kind {seg.kind!r}")
            if seg.clean_start != clean_pos or seg.orig_start != orig_pos:
                raise DataError(f"segment {seg} does not tile the previous one")
            if seg.clean_end < seg.clean_start or seg.orig_end < seg.orig_start:
                raise DataError(f"segment {seg} has negative extent")
            clean_len = seg.clean_end - seg.clean_start
            orig_len = seg.orig_end - seg.orig_start
            if seg.kind == COPY and clean_len != orig_len:
                raise DataError(f"copy segment {seg} changes length")
            if seg.kind == COPY and clean_len == 0:
                raise DataError(f"empty copy segment {seg}")
            if seg.kind == REPLACE and (clean_len == 0 or orig_len == 0):
                raise DataError(f"replace segment {seg} must be nonempty on both sides")
            if seg.kind == DELETE and (clean_len != 0 or orig_len == 0):
                raise DataError(f"delete segment {seg} must only consume original text")
            if seg.kind == INSERT and (clean_len == 0 or orig_len != 0):
                raise DataError(f"insert segment {seg} must only produce clean text")
            clean_pos = seg.clean_end
            orig_pos = seg.orig_end
        if clean_pos != self.clean_length or orig_pos != self.orig_length:
            raise DataError(
                f"segments cover ({clean_pos}, {orig_pos}) of "
                f"({self.clean_length}, {self.orig_length})"
            )

    def _project(self, start: int, end: int, *, inverse: bool) -> tuple[int, int] | None:
        src_len = self.clean_length if inverse else self.orig_length
        if not (0 <= start < end <= src_len):
            raise DataError(
                f"span ({start}, {end}) out of bounds for length {src_len}"
            )
        lo: int | None = None
        hi: int | None = None
        for seg in self.segments:
            if inverse:
                src0, src1 = seg.clean_start, seg.clean_end
                dst0, dst1 = seg.orig_start, seg.orig_end
            else:
                src0, src1 = seg.orig_start, seg.orig_end
                dst0, dst1 = seg.clean_start, seg.clean_end
            if src0 == src1 or dst0 == dst1:
                continue  # nothing to contribute in this direction
            if src1 <= start or src0 >= end:
                continue
            if seg.kind == COPY:
                piece0 = dst0 + (max(start, src0) - src0)
                piece1 = dst0 + (min(end, src1) - src0)
            else:
                piece0, piece1 = dst0, dst1
            lo = piece0 if lo is None else min(lo, piece0)
            hi = piece1 if hi is None else max(hi, piece1)
        if lo is None or hi is None:
            return None
        return (lo, hi)

    def project(self, start: int, end: int) -> tuple[int, int] | None:
        """Original coordinates to clean coordinates; None when dropped."""
        return self._project(start, end, inverse=False)

    def project_back(self, start: int, end: int) -> tuple[int, int] | None:
        """Clean coordinates to original coordinates; None when dropped."""
        return self._project(start, end, inverse=True)

    def to_json_obj(self) -> dict:
        return {
            "orig_length": self.orig_length,
            "clean_length": self.clean_length,
            "segments": [
                [s.clean_start, s.clean_end, s.orig_start, s.orig_end, s.kind]
                for s in self.segments
            ],
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "OffsetMap":
        segments = tuple(Segment(*entry) for entry in obj["segments"])
        omap = cls(segments, obj["orig_length"], obj["clean_length"])
        omap.check()
        return omap


def project_span(span: Span, offset_map: OffsetMap, *, inverse: bool = False) -> Span | None:
    """Project a labeled span through a map; None marks a dropped span."""
    result = offset_map._project(span.start, span.end, inverse=inverse)
    if result is None:
        return None
    return Span(result[0], result[1], span.label)


Edit = tuple[int, int, str]


def apply_edits(text: str, edits: Sequence[Edit]) -> tuple[str, OffsetMap]:
    """Apply non-overlapping ordered (start, end, replacement) edits.

    Returns the edited text and the map from ``text`` to it.
    """
    segments: list[Segment] = []
    pieces: list[str] = []
    orig_pos = 0
    clean_pos = 0
    last_end = 0
    for start, end, replacement in edits:
        if start < last_end or start > end or end > len(text):
            raise DataError(f"edit ({start}, {end}) is out of order or out of bounds")
        last_end = max(end, start + 1)  # forbid two inserts at one point
        if start > orig_pos:
            length = start - orig_pos
            segments.append(Segment(clean_pos, clean_pos + length, orig_pos, start, COPY))
            pieces.append(text[orig_pos:start])
            clean_pos += length
            orig_pos = start
        if replacement == text[start:end]:
            raise DataError(f"edit ({start}, {end}) is a no-op")
        if start == end:
            kind = INSERT
        elif not replacement:
            kind = DELETE
        else:
            kind = REPLACE
        segments.append(
            Segment(clean_pos, clean_pos + len(replacement), start, end, kind)
        )
        pieces.append(replacement)
        clean_pos += len(replacement)
        orig_pos = end
    if orig_pos < len(text):
        length = len(text) - orig_pos
        segments.append(Segment(clean_pos, clean_pos + length, orig_pos, len(text), COPY))
        pieces.append(text[orig_pos:])
        clean_pos += length
    clean = "".join(pieces)
    omap = OffsetMap(tuple(segments), len(text), clean_pos)
    return clean, omap


def _merge_adjacent_copies(segments: list[Segment]) -> tuple[Segment, ...]:
    merged: list[Segment] = []
    for seg in segments:
        if (
            merged
            and merged[-1].kind == COPY
            and seg.kind == COPY
            and merged[-1].clean_end == seg.clean_start
            and merged[-1].orig_end == seg.orig_start
        ):
            prev = merged[-1]
            merged[-1] = Segment(prev.clean_start, seg.clean_end, prev.orig_start, seg.orig_end, COPY)
        else:
            merged.append(seg)
    return tuple(merged)


def compose(map_a: OffsetMap, map_b: OffsetMap) -> OffsetMap:
    """Chain two maps: the clean side of ``map_a`` is the original side of ``map_b``.

    Replaced regions are kept atomic: when a replace segment of either map
    spans several segments of the other, all the involved tiles merge into
    one composite segment. Projecting through the composite then matches
    projecting through both maps in sequence for every map pair this
    pipeline produces, because each pass edits only material earlier
    passes copied verbatim and only the final pass inserts new text. For
    arbitrary pairs the two-step result can differ at edit borders (a
    replacement partially overlapping a replacement of the other map, or
    an insertion bordering deleted material, have no exact tiling
    representation); the composite is still a valid map, just with
    coarser expansion there.
    """
    if map_a.clean_length != map_b.orig_length:
        raise DataError(
            f"cannot compose: intermediate lengths differ "
            f"({map_a.clean_length} vs {map_b.orig_length})"
        )

    # Events over the shared middle axis. Extended segments (nonempty
    # middle side) partition it; point events (deletes of map_a, inserts
    # of map_b) sit between tiles.
    a_extended = [s for s in map_a.segments if s.clean_end > s.clean_start]
    a_deletes = [s for s in map_a.segments if s.clean_end == s.clean_start]
    b_extended = [s for s in map_b.segments if s.orig_end > s.orig_start]
    b_inserts = [s for s in map_b.segments if s.orig_end == s.orig_start]

    cuts = sorted(
        {0, map_a.clean_length}
        | {s.clean_start for s in a_extended}
        | {s.clean_end for s in a_extended}
        | {s.orig_start for s in b_extended}
        | {s.orig_end for s in b_extended}
    )

    # Elementary intervals with their covering segments.
    pieces: list[tuple[int, int, Segment, Segment]] = []
    ai = bi = 0
    for u, v in zip(cuts, cuts[1:]):
        while a_extended[ai].clean_end <= u:
            ai += 1
        while b_extended[bi].orig_end <= u:
            bi += 1
        pieces.append((u, v, a_extended[ai], b_extended[bi]))

    # Group elementary intervals forced together by replace segments.
    group_of = list(range(len(pieces)))
    for index in range(1, len(pieces)):
        u, v, a_seg, b_seg = pieces[index]
        prev_a, prev_b = pieces[index - 1][2], pieces[index - 1][3]
        if (a_seg.kind != COPY and a_seg is prev_a) or (b_seg.kind != COPY and b_seg is prev_b):
            group_of[index] = group_of[index - 1]

    deletes_at: dict[int, list[Segment]] = {}
    for seg in a_deletes:
        deletes_at.setdefault(seg.clean_start, []).append(seg)
    inserts_at: dict[int, list[Segment]] = {}
    for seg in b_inserts:
        inserts_at.setdefault(seg.orig_start, []).append(seg)

    def emit_points(position: int, out: list[Segment], a_pos: int, c_pos: int) -> tuple[int, int]:
        for seg in deletes_at.pop(position, []):
            out.append(Segment(c_pos, c_pos, a_pos, a_pos + (seg.orig_end - seg.orig_start), DELETE))
            a_pos += seg.orig_end - seg.orig_start
        for seg in inserts_at.pop(position, []):
            out.append(Segment(c_pos, c_pos + (seg.clean_end - seg.clean_start), a_pos, a_pos, INSERT))
            c_pos += seg.clean_end - seg.clean_start
        return a_pos, c_pos

    out: list[Segment] = []
    a_pos = 0
    c_pos = 0
    index = 0
    while index < len(pieces):
        u = pieces[index][0]
        a_pos, c_pos = emit_points(u, out, a_pos, c_pos)
        group = group_of[index]
        stop = index
        while stop < len(pieces) and group_of[stop] == group:
            stop += 1
        members = pieces[index:stop]
        g_start, g_end = members[0][0], members[-1][1]

        # Interior point events are absorbed into the group extents.
        interior_a = sum(
            seg.orig_end - seg.orig_start
            for pos in list(deletes_at)
            if g_start < pos < g_end
            for seg in deletes_at.pop(pos)
        )
        interior_c = sum(
            seg.clean_end - seg.clean_start
            for pos in list(inserts_at)
            if g_start < pos < g_end
            for seg in inserts_at.pop(pos)
        )

        a_len = 0
        c_len = 0
        pure_copy = len(members) == 1
        for u0, v0, a_seg, b_seg in members:
            if a_seg.kind == COPY:
                a_len += v0 - u0
            elif a_seg.clean_start == u0:  # count a replace's original side once
                a_len += a_seg.orig_end - a_seg.orig_start
            if a_seg.kind != COPY:
                pure_copy = False
            if b_seg.kind == COPY:
                c_len += v0 - u0
            elif b_seg.orig_start == u0:
                c_len += b_seg.clean_end - b_seg.clean_start
            if b_seg.kind != COPY:
                pure_copy = False
        a_len += interior_a
        c_len += interior_c

        if a_len == 0 and c_len == 0:
            pass
        elif a_len == 0:
            out.append(Segment(c_pos, c_pos + c_len, a_pos, a_pos, INSERT))
        elif c_len == 0:
            out.append(Segment(c_pos, c_pos, a_pos, a_pos + a_len, DELETE))
        else:
            kind = COPY if pure_copy else REPLACE
            out.append(Segment(c_pos, c_pos + c_len, a_pos, a_pos + a_len, kind))
        a_pos += a_len
        c_pos += c_len
        index = stop
    a_pos, c_pos = emit_points(map_a.clean_length, out, a_pos, c_pos)

    composed = OffsetMap(_merge_adjacent_copies(out), map_a.orig_length, map_b.clean_length)
    composed.check()
    return composed


# --- Passes -----------------------------------------------------------

_WS_RUN = re.compile(r"[ \t]+")
_HYPHEN_BREAK = re.compile(r"-\n(?=(.))", re.DOTALL)
_NEWLINE_RUN = re.compile(r"[ \t\n]+")
_BULLET = re.compile(r"[•–] ?")
_GLUED_STAGING = re.compile(r"(?<=[^\W\d_])(?=p[TNM][0-9xX])", re.UNICODE)


def _edits_nfc(text: str) -> list[Edit]:
    normalized = unicodedata.normalize("NFC", text)
    if normalized == text:
        return []
    # One edit per combining sequence (a starter plus its trailing marks),
    # so edits stay local and independent of neighboring characters. If
    # composition ever crossed a starter boundary the chunks would not
    # reassemble; fall back to a single whole-text replacement then.
    boundaries = [i for i, ch in enumerate(text) if unicodedata.combining(ch) == 0]
    if not boundaries or boundaries[0] != 0:
        boundaries.insert(0, 0)
    boundaries.append(len(text))
    chunks = [(a, b) for a, b in zip(boundaries, boundaries[1:]) if a < b]
    pieces = [unicodedata.normalize("NFC", text[a:b]) for a, b in chunks]
    if "".join(pieces) != normalized:
        return [(0, len(text), normalized)]
    return [
        (a, b, piece)
        for (a, b), piece in zip(chunks, pieces)
        if piece != text[a:b]
    ]


def _run_to_single_space(start: int, run: str) -> list[Edit]:
    """Minimal edits rewriting a whitespace run to one space.

    An existing space character is kept as a copy when possible, so the
    common double-space case becomes a single deletion.
    """
    if run == " ":
        return []
    if " " in run:
        keep = run.index(" ")
        edits = []
        if keep > 0:
            edits.append((start, start + keep, ""))
        if keep + 1 < len(run):
            edits.append((start + keep + 1, start + len(run), ""))
        return edits
    return [(start, start + len(run), " ")]


def _edits_whitespace(text: str) -> list[Edit]:
    edits: list[Edit] = []
    for match in _WS_RUN.finditer(text):
        edits.extend(_run_to_single_space(match.start(), match.group()))
    return edits


def _edits_dehyphenate(text: str) -> list[Edit]:
    edits: list[Edit] = []
    for match in _HYPHEN_BREAK.finditer(text):
        following = match.group(1)
        if following.isalpha() and following.islower():
            edits.append((match.start(), match.start() + 2, ""))
    return edits


def _edits_newlines(text: str) -> list[Edit]:
    edits: list[Edit] = []
    for match in _NEWLINE_RUN.finditer(text):
        run = match.group()
        if run.count("\n") == 1:
            edits.extend(_run_to_single_space(match.start(), run))
    return edits


def _edits_bullets(text: str) -> list[Edit]:
    edits: list[Edit] = []
    for match in _BULLET.finditer(text):
        if match.group() != "- ":
            edits.append((match.start(), match.end(), "- "))
    return edits


def _edits_staging(text: str) -> list[Edit]:
    return [(m.start(), m.start(), " ") for m in _GLUED_STAGING.finditer(text)]


PASS_FINDERS: dict[str, Callable[[str], list[Edit]]] = {
    "nfc": _edits_nfc,
    "whitespace": _edits_whitespace,
    "dehyphenate": _edits_dehyphenate,
    "newlines": _edits_newlines,
    "bullets": _edits_bullets,
    "staging": _edits_staging,
}

PASS_ORDER: tuple[str, ...] = tuple(PASS_FINDERS)

_MAX_PASS_ITERATIONS = 100


@dataclass(frozen=True)
class PreprocessedDocument:
    doc_id: str
    clean_text: str
    offset_map: OffsetMap
    passes: tuple[str, ...]


def resolve_passes(selection: str | Sequence[str] = "all") -> tuple[str, ...]:
    """Turn a CLI-style pass selection into the ordered pass tuple."""
    if isinstance(selection, str):
        if selection == "all":
            return PASS_ORDER
        if selection == "none":
            return ()
        selection = [name.strip() for name in selection.split(",") if name.strip()]
    unknown = [name for name in selection if name not in PASS_FINDERS]
    if unknown:
        raise DataError(f"unknown pass names {unknown}; choose from {list(PASS_ORDER)}")
    return tuple(name for name in PASS_ORDER if name in set(selection))


def apply_pass(text: str, name: str) -> tuple[str, OffsetMap]:
    """Run one pass to its fixed point, composing the per-round maps."""
    finder = PASS_FINDERS[name]
    current = text
    total = OffsetMap.identity(len(text))
    for _ in range(_MAX_PASS_ITERATIONS):
        edits = finder(current)
        if not edits:
            return current, total
        current, round_map = apply_edits(current, edits)
        total = compose(total, round_map)
    raise DataError(f"pass {name!r} did not converge")


def preprocess_text(text: str, passes: str | Sequence[str] = "all") -> tuple[str, OffsetMap, tuple[str, ...]]:
    names = resolve_passes(passes)
    current = text
    total = OffsetMap.identity(len(text))
    for name in names:
        current, pass_map = apply_pass(current, name)
        total = compose(total, pass_map)
    return current, total, names


def preprocess(text: str, passes: str | Sequence[str] = "all", doc_id: str = "") -> PreprocessedDocument:
    """Normalize ``text`` and record every edit in an offset map."""
    clean, omap, names = preprocess_text(text, passes)
    return PreprocessedDocument(doc_id, clean, omap, names)
