"""Shared fixtures: one lexicon, small corpora, and a trained model reused
across the unit-test modules (training is the slow part)."""

import numpy as np
import pytest

from ctxmt.composition import build_vocabulary, encode_corpus, expand_context_sizes
from ctxmt.corpus import CorpusSpec, LexiconConfig, PhenomenonKind, build_lexicon, generate_corpus
from ctxmt.model import ModelConfig, init, train

GRADCHECK_EPS = 1e-5


@pytest.fixture(scope="session")
def lexicon():
    return build_lexicon(LexiconConfig(), 7)


@pytest.fixture(scope="session")
def vocabulary(lexicon):
    return build_vocabulary(lexicon)


@pytest.fixture(scope="session")
def mixed_corpus(lexicon):
    spec = CorpusSpec(
        counts={
            PhenomenonKind.NONE: 120,
            PhenomenonKind.GENDER: 40,
            PhenomenonKind.FORMALITY: 40,
            PhenomenonKind.AUXILIARY: 40,
        },
        seed=11,
    )
    return generate_corpus(spec, lexicon)


@pytest.fixture(scope="session")
def tiny_config(vocabulary):
    return ModelConfig(
        vocab_size=len(vocabulary),
        embed_width=16,
        hidden_width=32,
        n_heads=2,
        epochs=2,
        batch_size=32,
        seed=1,
    )


@pytest.fixture(scope="session")
def trained_state(mixed_corpus, vocabulary):
    """A model trained long enough to use context on the dense mixed corpus."""
    config = ModelConfig(vocab_size=len(vocabulary), epochs=12, batch_size=32, seed=1)
    dataset = encode_corpus(expand_context_sizes(mixed_corpus, 3), vocabulary)
    return train(init(config), dataset, config)


def central_difference_gradcheck(state, loss_fn, rng, n_coords=100, eps=GRADCHECK_EPS):
    """Compare analytic gradients of loss_fn(state) against central finite
    differences at randomly chosen parameter coordinates.

    Returns the worst relative error seen.
    """
    from ctxmt import autodiff as ad

    loss = loss_fn()
    ad.backward(loss)
    grads = {name: p.grad.copy() for name, p in state.params.items() if p.grad is not None}
    for p in state.params.values():
        p.grad = None

    names = sorted(grads)
    worst = 0.0
    for _ in range(n_coords):
        name = names[rng.integers(len(names))]
        param = state.params[name]
        flat_index = int(rng.integers(param.data.size))
        index = np.unravel_index(flat_index, param.data.shape)
        original = param.data[index]
        param.data[index] = original + eps
        loss_plus = float(loss_fn().data)
        param.data[index] = original - eps
        loss_minus = float(loss_fn().data)
        param.data[index] = original
        numeric = (loss_plus - loss_minus) / (2 * eps)
        analytic = grads[name][index]
        scale = max(abs(numeric), abs(analytic), 1e-8)
        worst = max(worst, abs(numeric - analytic) / scale)
    return worst
