import warnings

import numpy as np
import pytest

from medrec.causal import CfConfig
from medrec.data import DdiEdge, DdiGraph, Drug
from medrec.ddinet import DdigcnConfig
from medrec.pipeline import PipelineConfig, run_training_pipeline
from medrec.recommender import TrainConfig
from medrec.synth import SynthConfig

# CI-scale epoch counts for the end-to-end runs (hyperparameters
# otherwise at their defaults)
CI_DDIGCN_EPOCHS = 100
CI_MDGCN_EPOCHS = 200


def make_graph(n, edges=(), d2=3, seed=0):
    """Small DdiGraph with random drug features."""
    rng = np.random.default_rng(seed)
    drugs = [Drug(i, f"d{i}", rng.normal(size=d2)) for i in range(n)]
    g = DdiGraph(drugs)
    for u, v, s in edges:
        g.add_edge(DdiEdge(u, v, s))
    return g


def ci_pipeline_config(delta=1.0, use_ddi=True):
    return PipelineConfig(
        synth=SynthConfig(),
        ddigcn=DdigcnConfig(epochs=CI_DDIGCN_EPOCHS),
        cf=CfConfig(k=5),
        train=TrainConfig(epochs=CI_MDGCN_EPOCHS, delta=delta, use_ddi=use_ddi),
    )


def _run(config):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return run_training_pipeline(config)


@pytest.fixture(scope="session")
def pipeline_full():
    return _run(ci_pipeline_config())


@pytest.fixture(scope="session")
def pipeline_full_repeat():
    return _run(ci_pipeline_config())


@pytest.fixture(scope="session")
def pipeline_delta0():
    return _run(ci_pipeline_config(delta=0.0))


@pytest.fixture(scope="session")
def pipeline_noddi():
    return _run(ci_pipeline_config(use_ddi=False))
