import asyncio
import logging
import threading
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field, ValidationError

from src.actions.shared import default_model_path
from src.errors import ConfigurationError, MfoError
from src.model import PredictorModel, load_model, rollout
from src.optimizer import optimize_prediction
from src.project import MfoProject, default_project_name, list_projects
from src.types import ObjectiveSpec

logger = logging.getLogger("server/app")


class PredictRequest(BaseModel):
    """Observed states (frames x state dimension) to roll forward"""
    states: List[List[float]]
    horizon: Optional[int] = Field(None, ge=1)
    model: Optional[str] = None


class OptimizeRequest(PredictRequest):
    goal: Optional[List[float]] = None
    weights: Dict[str, float] = Field(default_factory=dict)


class PredictResponse(BaseModel):
    states: List[List[float]]


class OptimizeResponse(PredictResponse):
    delta: List[List[float]]
    termination: str
    objective: float
    iterations: int
    terms: Dict[str, float]


class ServerState:
    """Loaded project and the models it has opened"""
    def __init__(self):
        self.project: Optional[MfoProject] = None
        self.models: Dict[str, PredictorModel] = {}
        # handlers run in worker threads
        self._lock = threading.RLock()

    def load_project(self, name: str) -> MfoProject:
        project = MfoProject(name)
        with self._lock:
            self.project = project
            self.models.clear()
        return project

    def require_project(self) -> MfoProject:
        with self._lock:
            if self.project is None:
                name = default_project_name()
                if not name:
                    raise ConfigurationError("No project loaded")
                self.load_project(name)
            return self.project

    def model(self, path: Optional[str]) -> PredictorModel:
        with self._lock:
            project = self.require_project()
            path = path or str(default_model_path(project))
            if path not in self.models:
                self.models[path] = load_model(Path(path))
            return self.models[path]


def _observed(request: PredictRequest) -> np.ndarray:
    return np.asarray(request.states, dtype=float)


class MfoServer:
    def __init__(self):
        self.app = FastAPI(title="MFO Server")
        self.state = ServerState()
        self.setup_routes()

    def _predict(self, request: PredictRequest) -> PredictResponse:
        project = self.state.require_project()
        model = self.state.model(request.model)
        observed = _observed(request)
        project.skeleton.check_state(observed)
        horizon = request.horizon or project.objective.horizon
        result = rollout(model, observed, None, horizon, keep_cache=False)
        return PredictResponse(states=result.states.tolist())

    def _optimize(self, request: OptimizeRequest) -> OptimizeResponse:
        project = self.state.require_project()
        model = self.state.model(request.model)
        data = project.objective.model_dump()
        data.update({k: v for k, v in (("horizon", request.horizon), ("goal", request.goal)) if v is not None})
        data["weights"].update(request.weights)
        try:
            spec = ObjectiveSpec.model_validate(data).human_only()
        except ValidationError as e:
            raise ConfigurationError(f"Invalid objective override: {e}")
        result = optimize_prediction(model, _observed(request), spec, project.skeleton, project.scene_for(spec))
        return OptimizeResponse(
            states=result.human_states.tolist(),
            delta=result.delta.tolist(),
            termination=result.termination.value,
            objective=float(result.objective),
            iterations=result.iterations,
            terms={k: float(v) for k, v in result.terms.items()},
        )

    def setup_routes(self):
        @self.app.get("/")
        async def root():
            """Server status endpoint"""
            return {
                "status": "running",
                "project": self.state.project.project_name if self.state.project else None,
            }

        @self.app.get("/projects")
        async def projects():
            """List available projects"""
            return {"projects": list_projects()}

        @self.app.post("/projects/{name}/load")
        async def load_project(name: str):
            """Load a specific project"""
            try:
                self.state.load_project(name)
                return {"status": "success", "project": name}
            except MfoError as e:
                raise HTTPException(status_code=400, detail={"error": e.code, "message": str(e)})

        @self.app.post("/predict", response_model=PredictResponse)
        async def predict(request: PredictRequest):
            """Roll the predictor forward from observed states"""
            try:
                return await asyncio.to_thread(self._predict, request)
            except MfoError as e:
                raise HTTPException(status_code=400, detail={"error": e.code, "message": str(e)})

        @self.app.post("/optimize", response_model=OptimizeResponse)
        async def optimize(request: OptimizeRequest):
            """Refine a prediction toward a goal and away from obstacles"""
            try:
                return await asyncio.to_thread(self._optimize, request)
            except MfoError as e:
                raise HTTPException(status_code=400, detail={"error": e.code, "message": str(e)})


def create_app():
    server = MfoServer()
    return server.app
