"""HTTP query service over loaded indices.

Indices are loaded into process memory by name; queries are read-only and can
run concurrently. Filters travel as a tagged JSON object matching the four
attribute families.
"""

from __future__ import annotations

from typing import Dict, List, Literal, Optional, Union

import numpy as np
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from .attrs import BoolPredicateFilter, EqualityFilter, RangeFilter, SubsetFilter
from .errors import JointAnnError
from .graph import JointGraph
from .search import SearchParams, query

app = FastAPI(title="jointann", version="0.1.0")

_indices: Dict[str, JointGraph] = {}


def load_index(name: str, path: str) -> JointGraph:
    g = JointGraph.load(path)
    _indices[name] = g
    return g


class EqualityFilterModel(BaseModel):
    type: Literal["equality"]
    target: int = Field(ge=0)


class RangeFilterModel(BaseModel):
    type: Literal["range"]
    lo: float
    hi: float


class SubsetFilterModel(BaseModel):
    type: Literal["subset"]
    required: int = Field(ge=0)
    width: int = Field(gt=0)


class BoolFilterModel(BaseModel):
    type: Literal["boolean"]
    truth_table: List[bool]
    width: int = Field(gt=0)


FilterModel = Union[EqualityFilterModel, RangeFilterModel, SubsetFilterModel, BoolFilterModel]


class LoadRequest(BaseModel):
    path: str


class QueryRequest(BaseModel):
    vector: List[float]
    filter: FilterModel = Field(discriminator="type")
    k: int = Field(default=10, gt=0)
    beam: int = Field(default=100, gt=0)


class QueryResponse(BaseModel):
    ids: List[int]
    matches: List[bool]
    visited_count: int
    distance_computations: int


class IndexInfo(BaseModel):
    name: str
    points: int
    dimension: int
    family: str
    mode: str
    degree: int


def _to_filter(m: FilterModel):
    if isinstance(m, EqualityFilterModel):
        return EqualityFilter(m.target)
    if isinstance(m, RangeFilterModel):
        return RangeFilter(m.lo, m.hi)
    if isinstance(m, SubsetFilterModel):
        return SubsetFilter(m.required, m.width)
    return BoolPredicateFilter(np.asarray(m.truth_table, dtype=bool), m.width)


def _get_index(name: str) -> JointGraph:
    g = _indices.get(name)
    if g is None:
        raise HTTPException(status_code=404, detail=f"no index named {name!r} is loaded")
    return g


def _info(name: str, g: JointGraph) -> IndexInfo:
    return IndexInfo(
        name=name, points=g.n, dimension=g.dim, family=g.family.name.lower(),
        mode=g.params.mode, degree=g.params.degree,
    )


@app.get("/health")
def health():
    return {"status": "ok", "indices": sorted(_indices)}


@app.post("/indexes/{name}/load", response_model=IndexInfo)
def load(name: str, req: LoadRequest):
    try:
        g = load_index(name, req.path)
    except FileNotFoundError:
        raise HTTPException(status_code=404, detail=f"index file not found: {req.path}")
    except JointAnnError as exc:
        raise HTTPException(status_code=400, detail=f"{type(exc).__name__}: {exc}")
    return _info(name, g)


@app.get("/indexes/{name}", response_model=IndexInfo)
def info(name: str):
    return _info(name, _get_index(name))


@app.post("/indexes/{name}/query", response_model=QueryResponse)
def run_query(name: str, req: QueryRequest):
    g = _get_index(name)
    params = SearchParams(k=req.k, l_search=max(req.beam, req.k))
    try:
        res = query(g, np.asarray(req.vector, dtype=np.float32), _to_filter(req.filter), params)
    except JointAnnError as exc:
        raise HTTPException(status_code=400, detail=f"{type(exc).__name__}: {exc}")
    return QueryResponse(
        ids=[int(i) for i in res.ids],
        matches=[bool(m) for m in res.matches],
        visited_count=res.visited_count,
        distance_computations=res.dc_count,
    )


@app.delete("/indexes/{name}")
def unload(name: str):
    _get_index(name)
    del _indices[name]
    return {"status": "unloaded", "name": name}
