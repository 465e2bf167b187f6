"""HTTP facade over the pipeline: one endpoint per pipeline operation.

Endpoints take file paths plus parameters (the service and its clients share
a filesystem) and return small JSON summaries; bulk artifacts always land in
the files the request names. Library errors map to 400, missing files to 404.
"""

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import __version__, pipeline
from .errors import PartmapError


class HealthResponse(BaseModel):
    status: str = "ok"
    version: str = ""


class BuildDictionaryRequest(BaseModel):
    features_path: str
    labels_path: str
    out_path: str
    k_per_class: int = Field(default=50, ge=1)
    delta: float = Field(default=0.45, gt=0.0, lt=1.0)
    seed: int = 0
    max_iters: int = Field(default=100, ge=1)
    class_names: list[str] | None = None


class BuildDictionaryResponse(BaseModel):
    out_path: str
    parts: int
    classes: int
    channels: int


class EncodeRequest(BaseModel):
    features_path: str
    model_path: str
    out_path: str


class EncodeResponse(BaseModel):
    out_path: str
    maps: int
    height: int
    width: int
    parts: int
    mean_active_fraction: float


class TrainRequest(BaseModel):
    features_path: str
    labels_path: str
    dict_path: str
    out_path: str
    mixtures: int = Field(default=4, ge=1)
    iters: int = Field(default=10, ge=1)
    prior: float = Field(default=0.7, gt=0.0, le=1.0)
    tau: float = Field(default=0.6, ge=0.0, le=1.0)
    seed: int = 0
    bg_features: list[tuple[str, str]] = Field(
        default_factory=list, description="(occluder kind, FMAP path) pairs"
    )


class TrainResponse(BaseModel):
    out_path: str
    classes: int
    mixtures: int
    backgrounds: list[str]
    objectives: dict[str, list[float]]


class ClassifyRequest(BaseModel):
    features_path: str
    model_path: str
    out_path: str | None = None
    prior: float = Field(default=0.7, gt=0.0, le=1.0)
    use_occlusion: bool = True
    background: str = "pooled"
    ids_path: str | None = None


class Prediction(BaseModel):
    source_id: str
    label: int
    scores: list[float]
    visible_fraction: float


class ClassifyResponse(BaseModel):
    out_path: str | None
    predictions: list[Prediction]


class ExplainRequest(BaseModel):
    features_path: str
    model_path: str
    index: int = Field(ge=0)
    out_prefix: str
    prior: float = Field(default=0.7, gt=0.0, le=1.0)
    background: str = "pooled"
    top: int = Field(default=5, ge=1)


class ExplainResponse(BaseModel):
    heatmap_path: str
    parts_path: str
    source_id: str
    label: int
    class_name: str
    best_mixture: int
    log_likelihood: float
    visible_fraction: float


class FuseRequest(BaseModel):
    dcnn_probs_path: str
    comp_pred_path: str
    out_path: str
    tau: float = Field(default=0.6, ge=0.0, le=1.0)


class FuseResponse(BaseModel):
    out_path: str
    n_items: int
    branch_usage: dict[str, float]


class EvaluateRequest(BaseModel):
    pred_path: str
    labels_path: str
    conditions_path: str | None = None
    out_path: str | None = None
    class_names: list[str] | None = None


class ConditionCell(BaseModel):
    accuracy: float
    count: int


class EvaluateResponse(BaseModel):
    per_condition: dict[str, ConditionCell]
    mean_accuracy: float
    confusion_matrix: list[list[int]]
    branch_usage: dict[str, float]
    n_items: int
    class_names: list[str]
    out_path: str | None


class SynthRequest(BaseModel):
    spec_path: str
    out_path: str
    labels_out: str | None = None


class SynthResponse(BaseModel):
    out_path: str
    labels_path: str | None
    maps: int


def create_app() -> FastAPI:
    app = FastAPI(
        title="partmap",
        version=__version__,
        description="Part-based Bernoulli compositional models over feature maps.",
    )

    @app.exception_handler(PartmapError)
    async def _domain_error(_: Request, exc: PartmapError) -> JSONResponse:
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.exception_handler(FileNotFoundError)
    async def _missing_file(_: Request, exc: FileNotFoundError) -> JSONResponse:
        return JSONResponse(status_code=404, content={"detail": str(exc)})

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(version=__version__)

    @app.post("/dictionary/build", response_model=BuildDictionaryResponse)
    def build_dictionary(req: BuildDictionaryRequest) -> BuildDictionaryResponse:
        return BuildDictionaryResponse(**pipeline.build_dictionary(**req.model_dump()))

    @app.post("/encode", response_model=EncodeResponse)
    def encode(req: EncodeRequest) -> EncodeResponse:
        return EncodeResponse(**pipeline.encode_features(**req.model_dump()))

    @app.post("/train", response_model=TrainResponse)
    def train(req: TrainRequest) -> TrainResponse:
        return TrainResponse(**pipeline.train(**req.model_dump()))

    @app.post("/classify", response_model=ClassifyResponse)
    def classify(req: ClassifyRequest) -> ClassifyResponse:
        return ClassifyResponse(**pipeline.classify(**req.model_dump()))

    @app.post("/explain", response_model=ExplainResponse)
    def explain(req: ExplainRequest) -> ExplainResponse:
        return ExplainResponse(**pipeline.explain(**req.model_dump()))

    @app.post("/fuse", response_model=FuseResponse)
    def fuse(req: FuseRequest) -> FuseResponse:
        return FuseResponse(**pipeline.fuse_files(**req.model_dump()))

    @app.post("/evaluate", response_model=EvaluateResponse)
    def evaluate(req: EvaluateRequest) -> EvaluateResponse:
        return EvaluateResponse(**pipeline.evaluate_files(**req.model_dump()))

    @app.post("/synth", response_model=SynthResponse)
    def synth(req: SynthRequest) -> SynthResponse:
        return SynthResponse(**pipeline.synthesize(**req.model_dump()))

    return app


app = create_app()
