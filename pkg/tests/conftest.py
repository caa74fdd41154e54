import numpy as np
import pytest

from bdkit.bundle import ModelBundle, load_bundle, save_bundle
from bdkit.categories import CATEGORY_ORDER
from bdkit.nn import init_mlp


@pytest.fixture(scope="session")
def toy_bundle() -> ModelBundle:
    """Randomly initialized (untrained) bundle for mechanics tests."""
    models = {}
    for i, category in enumerate(CATEGORY_ORDER):
        rng = np.random.Generator(np.random.PCG64(100 + i))
        models[category] = init_mlp(category.input_size, rng)
    blob = save_bundle(models, {"seed": -1, "note": "untrained test bundle"})
    return load_bundle(blob)


@pytest.fixture(scope="session")
def toy_bundle_path(toy_bundle, tmp_path_factory):
    models = toy_bundle.models
    blob = save_bundle(models, toy_bundle.metadata)
    path = tmp_path_factory.mktemp("bundles") / "toy.bdci"
    path.write_bytes(blob)
    return path


@pytest.fixture(scope="session")
def zero_bundle() -> ModelBundle:
    """All-zero weights: every model predicts mu=0, log sigma=0 (sigma=1)."""
    models = {}
    for category in CATEGORY_ORDER:
        rng = np.random.Generator(np.random.PCG64(0))
        model = init_mlp(category.input_size, rng)
        for w in model.weights:
            w[:] = 0.0
        for b in model.biases:
            b[:] = 0.0
        models[category] = model
    return load_bundle(save_bundle(models, {"seed": -1, "note": "zero bundle"}))
