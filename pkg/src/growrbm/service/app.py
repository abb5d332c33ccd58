"""HTTP service wrapping the library: one endpoint per command.

Endpoints are synchronous and blocking (training and AIS are batch jobs);
they read and write the server's filesystem, which is also the client's
filesystem in the default in-process deployment. Domain validation errors
surface as 400, runtime failures (such as a diverged AIS run) as 500.

Every artifact-producing call writes a manifest recording the resolved
configuration, seeds, dataset fingerprint, and code version, so a run can
be reproduced byte-for-byte from the manifest alone.
"""

from __future__ import annotations

import json
import os
import time
from importlib.metadata import PackageNotFoundError, version

import numpy as np
from fastapi import FastAPI
from fastapi.responses import JSONResponse

from .. import evaluation as ev
from ..data_io import (
    Dataset,
    dataset_hash,
    load_dataset,
    tile_binary_images,
    write_pgm,
)
from ..model import Variant, init_model, load_model
from ..sampling import RngStream, init_chain, run_chain
from ..training import TrainConfig, train
from .schemas import (
    BlockReport,
    EvalRequest,
    EvalResponse,
    GradcheckRequest,
    GradcheckResponse,
    InspectZRequest,
    InspectZResponse,
    IntervalTop,
    SampleRequest,
    SampleResponse,
    TrainRequest,
    TrainResponse,
)

try:
    CODE_VERSION = version("growrbm")
except PackageNotFoundError:  # running from a source tree
    CODE_VERSION = "unknown"

app = FastAPI(title="growrbm service", version=CODE_VERSION)


@app.exception_handler(ValueError)
@app.exception_handler(FileNotFoundError)
async def _bad_request(_request, exc):
    return JSONResponse(status_code=400, content={"detail": str(exc)})


@app.exception_handler(RuntimeError)
async def _runtime_failure(_request, exc):
    return JSONResponse(status_code=500, content={"detail": str(exc)})


def _write_manifest(path: str, command: str, config: dict, hashes: dict) -> str:
    manifest = {
        "command": command,
        "code_version": CODE_VERSION,
        "config": config,
        "dataset_hash": hashes,
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(manifest, f, sort_keys=True, indent=2)
        f.write("\n")
    return path


def _load_split(path: str, binarize_seed: int, split: str) -> Dataset:
    if not os.path.isfile(path):
        raise FileNotFoundError(f"dataset file not found: {path!r}")
    return load_dataset(path, binarize_seed=binarize_seed, split=split)


@app.get("/health")
def health() -> dict:
    return {"status": "ok", "version": CODE_VERSION}


@app.post("/train", response_model=TrainResponse)
def train_endpoint(req: TrainRequest) -> TrainResponse:
    data = _load_split(req.data, req.binarize_seed, "train")
    if req.model != "irbm" and req.hidden < 1:
        raise ValueError("rbm and orbm need --hidden of at least 1")
    params = init_model(
        req.model,
        data.num_visible,
        req.hidden,
        beta=req.beta,
        init_scale=req.init_scale,
        seed=req.seed,
    )
    config = TrainConfig(
        lr=req.lr,
        reg_kind=req.reg,
        lam=req.lam,
        batch_size=req.batch,
        gibbs_steps=req.cd_steps,
        epochs=req.epochs,
        method=req.method,
        seed=req.seed,
        beta=req.beta,
        max_hidden_cap=req.max_hidden,
        checkpoint_every=req.checkpoint_every,
    )
    started = time.perf_counter()
    run = train(params, data.to_float(), config, out_dir=req.out)
    manifest = _write_manifest(
        os.path.join(req.out, "manifest.json"),
        "train",
        req.model_dump(by_alias=True),
        {"train": dataset_hash(data)},
    )
    last = run.history[-1] if run.history else None
    return TrainResponse(
        checkpoint=req.out,
        history_csv=os.path.join(req.out, "history.csv"),
        manifest=manifest,
        model=req.model,
        final_hidden=run.params.num_hidden,
        epochs=req.epochs,
        mean_free_energy=None if last is None else last["mean_free_energy"],
        wall_seconds=time.perf_counter() - started,
    )


EVAL_CSV_HEADER = "model,size,lnZ,lnZ_lo,lnZ_hi,nll,ci"


def eval_csv_lines(resp: EvalResponse) -> list[str]:
    row = (
        f"{resp.model},{resp.size},{resp.lnZ:.6f},{resp.lnZ_lo:.6f},"
        f"{resp.lnZ_hi:.6f},{resp.nll:.6f},{resp.ci:.6f}"
    )
    return [EVAL_CSV_HEADER, row]


@app.post("/eval", response_model=EvalResponse)
def eval_endpoint(req: EvalRequest) -> EvalResponse:
    params, _meta = load_model(req.checkpoint)
    data = _load_split(req.data, req.binarize_seed, "test")
    if data.num_visible != params.num_visible:
        raise ValueError(
            f"dataset width {data.num_visible} does not match model "
            f"({params.num_visible} visible units)"
        )
    ess = None
    if req.exact:
        ln_z = ev.exact_log_partition_small(params)
        lo = hi = ln_z
        method = "exact"
    else:
        base = None
        if req.ais_base == "data":
            p = np.clip(data.to_float().mean(axis=0), 1e-4, 1.0 - 1e-4)
            base = np.log(p / (1.0 - p))
        result = ev.ais_log_partition(
            params,
            ev.AisConfig(
                num_intermediate=req.ais_inter,
                num_chains=req.ais_chains,
                seed=req.seed,
            ),
            base_visible_bias=base,
            threads=req.threads,
        )
        ln_z, lo, hi, ess = (
            result.ln_z_hat,
            result.ln_z_lo3sigma,
            result.ln_z_hi3sigma,
            result.ess,
        )
        method = "ais"
    nll, ci = ev.estimate_nll(params, data.to_float(), ln_z)
    resp = EvalResponse(
        model=params.variant.value,
        size=params.num_hidden,
        lnZ=ln_z,
        lnZ_lo=lo,
        lnZ_hi=hi,
        nll=nll,
        ci=ci,
        ess=ess,
        method=method,
        csv=req.csv,
    )
    if req.csv:
        with open(req.csv, "w", encoding="utf-8") as f:
            f.write("\n".join(eval_csv_lines(resp)) + "\n")
        _write_manifest(
            req.csv + ".manifest.json",
            "eval",
            req.model_dump(),
            {"eval": dataset_hash(data)},
        )
    return resp


@app.post("/sample", response_model=SampleResponse)
def sample_endpoint(req: SampleRequest) -> SampleResponse:
    params, _meta = load_model(req.checkpoint)
    mode = req.init
    if mode == "auto":
        # the zK warm start helps the finite ordered model reach late units;
        # the irbm does not need it
        mode = "zK" if params.variant is Variant.ORBM else "random"
    gen = RngStream(req.seed, stream=0).generator()
    state = init_chain(params, gen, num_chains=req.num_samples, mode=mode)
    state = run_chain(params, state, req.steps, gen, pin_first_z=(mode == "zK"))
    shape = None
    if req.img_shape:
        try:
            h, w = (int(part) for part in req.img_shape.lower().split("x"))
        except Exception as exc:
            raise ValueError(f"bad img_shape {req.img_shape!r}, expected HxW") from exc
        shape = (h, w)
    write_pgm(req.out, tile_binary_images(state.v, image_shape=shape))
    _write_manifest(
        req.out + ".manifest.json", "sample", req.model_dump(), {}
    )
    return SampleResponse(
        out=req.out, num_samples=req.num_samples, steps=req.steps, init=mode
    )


def parse_intervals(text: str | None) -> list[tuple[int, int]]:
    if not text:
        return []
    out = []
    for part in text.split(","):
        try:
            lo, hi = (int(x) for x in part.strip().split(":"))
        except Exception as exc:
            raise ValueError(f"bad interval {part!r}, expected a:b") from exc
        if lo < 1 or hi <= lo:
            raise ValueError(f"bad z interval [{lo}, {hi})")
        out.append((lo, hi))
    return out


@app.post("/inspect-z", response_model=InspectZResponse)
def inspect_z_endpoint(req: InspectZRequest) -> InspectZResponse:
    params, _meta = load_model(req.checkpoint)
    if not params.variant.ordered:
        raise ValueError("inspect-z applies to the ordered variants")
    data = _load_split(req.data, req.binarize_seed, "test")
    examples = data.to_float()
    if req.limit is not None:
        examples = examples[: req.limit]
    z_probs = ev.inspect_z(params, examples)
    os.makedirs(req.out, exist_ok=True)
    for i in range(z_probs.shape[0]):
        path = os.path.join(req.out, f"z_given_v_{i:06d}.csv")
        with open(path, "w", encoding="utf-8") as f:
            f.write("z,prob\n")
            for z_val, p in enumerate(z_probs[i], start=1):
                f.write(f"{z_val},{float(p)!r}\n")
    intervals = parse_intervals(req.intervals)
    tops = ev.top_examples_by_interval(z_probs, intervals, top_k=req.top_k)
    out_tops = []
    for entry in tops:
        lo, hi = entry["interval"]
        path = os.path.join(req.out, f"top_z_in_{lo}_{hi}.csv")
        with open(path, "w", encoding="utf-8") as f:
            f.write("rank,example_index,prob\n")
            for rank, (idx, p) in enumerate(
                zip(entry["indices"], entry["probs"]), start=1
            ):
                f.write(f"{rank},{idx},{float(p)!r}\n")
        out_tops.append(IntervalTop(lo=lo, hi=hi, indices=entry["indices"], probs=entry["probs"]))
    _write_manifest(
        os.path.join(req.out, "manifest.json"),
        "inspect-z",
        req.model_dump(),
        {"inspect": dataset_hash(data)},
    )
    return InspectZResponse(
        out=req.out,
        num_examples=z_probs.shape[0],
        support_max=z_probs.shape[1],
        per_example_csvs=z_probs.shape[0],
        intervals=out_tops,
    )


@app.post("/gradcheck", response_model=GradcheckResponse)
def gradcheck_endpoint(req: GradcheckRequest) -> GradcheckResponse:
    params, _meta = load_model(req.checkpoint)
    gen = RngStream(req.seed, stream=0).generator()
    worst: dict[str, BlockReport] = {}
    passed = True
    for _ in range(req.trials):
        v = (gen.random(params.num_visible) < 0.5).astype(np.float64)
        report = ev.gradcheck(
            params,
            v,
            rel_tol=req.rel_tol,
            abs_floor=req.abs_floor,
            step=req.step,
        )
        passed = passed and report.passed
        for block in report.blocks:
            prev = worst.get(block.name)
            if prev is None or block.max_err_ratio > prev.max_err_ratio:
                worst[block.name] = BlockReport(
                    name=block.name,
                    max_err_ratio=block.max_err_ratio,
                    worst_index=None
                    if block.worst_index is None
                    else [int(i) for i in block.worst_index],
                    passed=block.passed,
                )
    return GradcheckResponse(
        passed=passed, trials=req.trials, blocks=list(worst.values())
    )
