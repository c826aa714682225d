"""Canonical JSON serialization and hash-chained transcript files.

A transcript is one JSON object per line: a header describing the run,
then one line per transition with the fields step, query, response,
alpha_draw, dataset_delta, belief_generation, digest (in that order).
Doubles round-trip at full precision (shortest-repr encoding). The digest
chains each line to its predecessor over the canonical encoding, so any
byte-level edit is detectable.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import IO, Any, Iterator

import numpy as np

from .belief import Belief
from .domain import Trajectory
from .errors import TranscriptError
from .imdp import InfoState, LabeledItem, TransitionRecord
from .queries import (
    ComparisonQuery,
    CorrectionQuery,
    DemonstrationQuery,
    Evidence,
    FeatureLabelQuery,
    LabelQuery,
    Query,
    Response,
)

SCHEMA_VERSION = 1


def canonical_json(doc: Any) -> str:
    """Compact, key-order-preserving, NaN-rejecting encoding."""
    return json.dumps(doc, separators=(",", ":"), allow_nan=False)


def _floats(values) -> list[float]:
    return [float(v) for v in np.asarray(values).ravel()]


def traj_to_doc(traj: Trajectory) -> dict:
    return {"steps": [[[int(s[0]), int(s[1])], a] for s, a in traj.steps]}


def traj_from_doc(doc: dict) -> Trajectory:
    return Trajectory(steps=tuple(((int(s[0]), int(s[1])), a) for s, a in doc["steps"]))


def query_to_doc(query: Query) -> dict:
    if isinstance(query, LabelQuery):
        return {"kind": "label", "candidate": traj_to_doc(query.candidate),
                "phi": _floats(query.phi)}
    if isinstance(query, ComparisonQuery):
        return {"kind": "comparison", "items": [traj_to_doc(t) for t in query.items],
                "phis": [_floats(row) for row in query.phis]}
    if isinstance(query, DemonstrationQuery):
        return {"kind": "demonstration", "start": list(query.start),
                "waypoints": [list(w) for w in query.waypoints],
                "support": [traj_to_doc(t) for t in query.support],
                "phis": [_floats(row) for row in query.phis]}
    if isinstance(query, FeatureLabelQuery):
        return {"kind": "feature_label", "feature_index": query.feature_index,
                "probe": traj_to_doc(query.probe), "phi": _floats(query.phi)}
    if isinstance(query, CorrectionQuery):
        return {"kind": "correction", "target": traj_to_doc(query.target),
                "candidates": [traj_to_doc(t) for t in query.candidates],
                "phis": [_floats(row) for row in query.phis]}
    raise TypeError(f"unknown query type {type(query).__name__}")


def query_from_doc(doc: dict) -> Query:
    kind = doc["kind"]
    if kind == "label":
        return LabelQuery(candidate=traj_from_doc(doc["candidate"]),
                          phi=np.array(doc["phi"]))
    if kind == "comparison":
        return ComparisonQuery(items=tuple(traj_from_doc(t) for t in doc["items"]),
                               phis=np.array(doc["phis"]))
    if kind == "demonstration":
        return DemonstrationQuery(
            start=tuple(doc["start"]),
            waypoints=tuple(tuple(w) for w in doc["waypoints"]),
            support=tuple(traj_from_doc(t) for t in doc["support"]),
            phis=np.array(doc["phis"]))
    if kind == "feature_label":
        return FeatureLabelQuery(feature_index=int(doc["feature_index"]),
                                 probe=traj_from_doc(doc["probe"]),
                                 phi=np.array(doc["phi"]))
    if kind == "correction":
        return CorrectionQuery(target=traj_from_doc(doc["target"]),
                               candidates=tuple(traj_from_doc(t) for t in doc["candidates"]),
                               phis=np.array(doc["phis"]))
    raise ValueError(f"unknown query kind {kind!r}")


def response_to_doc(response: Response) -> dict:
    value = response.value
    if isinstance(value, Trajectory):
        return {"kind": response.kind, "value": traj_to_doc(value)}
    return {"kind": response.kind, "value": value}


def response_from_doc(doc: dict) -> Response:
    value = doc["value"]
    if isinstance(value, dict):
        return Response(kind=doc["kind"], value=traj_from_doc(value))
    return Response(kind=doc["kind"], value=value)


def evidence_to_doc(ev: Evidence) -> dict:
    return {
        "query": query_to_doc(ev.query),
        "response": response_to_doc(ev.response),
        "weight": float(ev.weight),
        "feature_weights": None if ev.feature_weights is None else _floats(ev.feature_weights),
    }


def evidence_from_doc(doc: dict) -> Evidence:
    fw = doc["feature_weights"]
    return Evidence(
        query=query_from_doc(doc["query"]),
        response=response_from_doc(doc["response"]),
        weight=float(doc["weight"]),
        feature_weights=None if fw is None else np.array(fw),
    )


def belief_to_doc(belief: Belief) -> dict:
    return {
        "particles": [_floats(row) for row in belief.particles],
        "weights": _floats(belief.weights),
        "generation": belief.generation,
        "seed": belief.seed,
        "rng_state": belief.rng.bit_generator.state,
    }


def belief_from_doc(doc: dict) -> Belief:
    bit_gen = np.random.PCG64()
    bit_gen.state = doc["rng_state"]
    return Belief(
        particles=np.array(doc["particles"], dtype=np.float64),
        weights=np.array(doc["weights"], dtype=np.float64),
        rng=np.random.Generator(bit_gen),
        generation=int(doc["generation"]),
        seed=int(doc["seed"]),
    )


def state_to_doc(state: InfoState) -> dict:
    return {
        "dataset": [
            {"trajectory": traj_to_doc(i.trajectory), "annotation": i.annotation,
             "weight": float(i.weight)}
            for i in state.dataset
        ],
        "belief": belief_to_doc(state.belief),
        "feature_weights": _floats(state.feature_weights),
        "evidence_log": [evidence_to_doc(ev) for ev in state.evidence_log],
        "step": state.step,
    }


def state_from_doc(doc: dict) -> InfoState:
    return InfoState(
        dataset=tuple(
            LabeledItem(trajectory=traj_from_doc(i["trajectory"]),
                        annotation=i["annotation"], weight=float(i["weight"]))
            for i in doc["dataset"]
        ),
        belief=belief_from_doc(doc["belief"]),
        feature_weights=np.array(doc["feature_weights"]),
        evidence_log=tuple(evidence_from_doc(ev) for ev in doc["evidence_log"]),
        step=int(doc["step"]),
    )


def _chain_digest(prev_digest: str, body: dict) -> str:
    payload = prev_digest + canonical_json(body)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


@dataclass
class StepLine:
    """One parsed transcript line, with its recorded integrity fields."""

    step: int
    query: Query
    response: Response
    alpha_draw: float | None
    dataset_delta: int
    belief_generation: int
    digest: str
    line_no: int


class TranscriptWriter:
    """Appends a header and hash-chained step lines to a text stream.

    To append to an existing transcript, pass the chain tip (see
    ``chain_tip``) as ``prev_digest`` and skip ``write_header``.
    """

    def __init__(self, stream: IO[str], prev_digest: str = ""):
        self._stream = stream
        self._prev_digest = prev_digest

    def write_header(self, header: dict) -> None:
        doc = {"v": SCHEMA_VERSION, "kind": "header", **header}
        self._stream.write(canonical_json(doc) + "\n")
        self._prev_digest = _chain_digest("", doc)

    def write_step(self, query: Query, response: Response, record: TransitionRecord) -> None:
        body = {
            "step": record.step,
            "query": query_to_doc(query),
            "response": response_to_doc(response),
            "alpha_draw": record.alpha_draw,
            "dataset_delta": record.dataset_delta,
            "belief_generation": record.belief_generation,
        }
        digest = _chain_digest(self._prev_digest, body)
        self._stream.write(canonical_json({**body, "digest": digest}) + "\n")
        self._prev_digest = digest


def read_transcript(lines: Iterator[str]) -> tuple[dict, list[StepLine]]:
    """Parse a transcript; verify nothing (integrity checks are the replayer's job).

    Raises TranscriptError with a 1-based line number for malformed lines.
    """
    header: dict | None = None
    steps: list[StepLine] = []
    for line_no, raw in enumerate(lines, start=1):
        raw = raw.strip()
        if not raw:
            continue
        try:
            doc = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise TranscriptError(line_no, f"invalid JSON: {exc}") from exc
        if line_no == 1:
            if doc.get("kind") != "header" or doc.get("v") != SCHEMA_VERSION:
                raise TranscriptError(line_no, "missing or unsupported transcript header")
            header = doc
            continue
        try:
            steps.append(StepLine(
                step=int(doc["step"]),
                query=query_from_doc(doc["query"]),
                response=response_from_doc(doc["response"]),
                alpha_draw=doc["alpha_draw"],
                dataset_delta=int(doc["dataset_delta"]),
                belief_generation=int(doc["belief_generation"]),
                digest=doc["digest"],
                line_no=line_no,
            ))
        except TranscriptError:
            raise
        except Exception as exc:
            raise TranscriptError(line_no, f"bad step line: {exc}") from exc
    if header is None:
        raise TranscriptError(1, "empty transcript")
    return header, steps


def chain_tip(header: dict, steps: list[StepLine]) -> str:
    """Digest to chain the next appended line to."""
    if steps:
        return steps[-1].digest
    return _chain_digest("", header)


def verify_chain(header: dict, steps: list[StepLine]) -> int | None:
    """Recompute the digest chain; return the first bad line_no or None."""
    header_body = {k: v for k, v in header.items()}
    prev = _chain_digest("", header_body)
    for line in steps:
        body = {
            "step": line.step,
            "query": query_to_doc(line.query),
            "response": response_to_doc(line.response),
            "alpha_draw": line.alpha_draw,
            "dataset_delta": line.dataset_delta,
            "belief_generation": line.belief_generation,
        }
        expected = _chain_digest(prev, body)
        if expected != line.digest:
            return line.line_no
        prev = line.digest
    return None
