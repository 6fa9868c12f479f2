import logging
from typing import Any, Dict, List, Optional

import pandas as pd
from langgraph.graph import END, StateGraph
from langgraph.graph.state import CompiledStateGraph
from typing_extensions import TypedDict

from freqeval.metrics import FrequencyEvaluator
from models.lti_system import LtiSystem, validate
from models.matrix_file import load_system
from synthesis.orchestrator import SynthesisOrchestrator, successful_controllers
from utils.exceptions import CompetCtlError

logger = logging.getLogger(__name__)


class ExperimentState(TypedDict):
    system_path: str
    system: Optional[LtiSystem]
    methods: List[str]
    grid_size: Optional[int]
    report: Any
    synthesis: Dict[str, Dict[str, Any]]
    metrics: Any
    summary: Optional[pd.DataFrame]
    error: str
    error_stage: str


class ExperimentWorkflow:
    """
    One table row block per plant: load, validate, synthesize every method,
    evaluate on the frequency grid and consolidate the summary table.
    """

    def __init__(self, orchestrator: Optional[SynthesisOrchestrator] = None,
                 max_workers: Optional[int] = None):
        self.orchestrator = orchestrator or SynthesisOrchestrator()
        self.max_workers = max_workers
        self.workflow = self._build_workflow()

    def _build_workflow(self) -> CompiledStateGraph:
        workflow = StateGraph(ExperimentState)

        workflow.add_node("load", self.load)
        workflow.add_node("validate", self.validate)
        workflow.add_node("synthesize", self.synthesize)
        workflow.add_node("evaluate", self.evaluate)
        workflow.add_node("consolidate", self.consolidate)

        workflow.set_entry_point("load")
        workflow.add_conditional_edges("load", self._route, {"continue": "validate", "stop": END})
        workflow.add_conditional_edges("validate", self._route, {"continue": "synthesize", "stop": END})
        workflow.add_conditional_edges("synthesize", self._route, {"continue": "evaluate", "stop": END})
        workflow.add_edge("evaluate", "consolidate")
        workflow.add_edge("consolidate", END)

        return workflow.compile()

    @staticmethod
    def _route(state: ExperimentState) -> str:
        return "stop" if state.get("error") else "continue"

    def load(self, state: ExperimentState) -> ExperimentState:
        if state.get("system") is not None:
            return state
        try:
            state["system"] = load_system(state["system_path"])
            logger.info(f"Loaded {state['system'].name} with dims {state['system'].dims}")
        except CompetCtlError as e:
            logger.error(f"Error loading {state['system_path']}: {e}", exc_info=True)
            state["error"] = str(e)
            state["error_stage"] = "load"
        return state

    def validate(self, state: ExperimentState) -> ExperimentState:
        report = validate(state["system"])
        state["report"] = report
        if not report.passed:
            state["error"] = f"validation failed: {', '.join(report.failures)}"
            state["error_stage"] = "validate"
        return state

    def synthesize(self, state: ExperimentState) -> ExperimentState:
        try:
            state["synthesis"] = self.orchestrator.run(state["system"], state["methods"])
        except CompetCtlError as e:
            logger.error(f"Error in synthesis: {e}", exc_info=True)
            state["error"] = str(e)
            state["error_stage"] = "synthesize"
            return state
        if not successful_controllers(state["synthesis"]):
            state["error"] = "every synthesis method failed"
            state["error_stage"] = "synthesize"
        return state

    def evaluate(self, state: ExperimentState) -> ExperimentState:
        sys = state["system"]
        try:
            evaluator = FrequencyEvaluator(sys, grid_size=state.get("grid_size"), max_workers=self.max_workers)
            state["metrics"] = evaluator.evaluate(successful_controllers(state["synthesis"]))
        except CompetCtlError as e:
            logger.error(f"Error evaluating controllers on {sys.name}: {e}", exc_info=True)
            state["error"] = str(e)
            state["error_stage"] = "evaluate"
        return state

    def consolidate(self, state: ExperimentState) -> ExperimentState:
        if state.get("metrics") is None:
            return state
        summary = state["metrics"].summary_frame()
        order = {method: i for i, method in enumerate(state["methods"])}
        summary = summary.sort_values("controller", key=lambda c: c.map(order), kind="stable")
        state["summary"] = summary.reset_index(drop=True)
        failed = [m for m, r in state["synthesis"].items() if not r.get("success")]
        if failed:
            logger.warning(f"{state['system'].name}: no row for failed methods {failed}")
        logger.info(f"Consolidated {len(summary)} rows for {state['system'].name}")
        return state

    def run(self, system_path: str = "", methods: Optional[List[str]] = None,
            grid_size: Optional[int] = None, system: Optional[LtiSystem] = None) -> ExperimentState:
        initial_state: ExperimentState = {
            "system_path": system_path,
            "system": system,
            "methods": list(methods or ["h2", "hinf", "cr", "regret", "noncausal"]),
            "grid_size": grid_size,
            "report": None,
            "synthesis": {},
            "metrics": None,
            "summary": None,
            "error": "",
            "error_stage": "",
        }
        logger.info(f"Starting experiment workflow for {system.name if system else system_path}")
        return self.workflow.invoke(initial_state)
