"""Wire-protocol and loopback-fidelity tests for the reference model server.

The loopback criterion runs a live uvicorn instance on a loopback port and
drives it through the seqbeam RemoteProvider client, comparing against direct
in-process calls to the same deterministically seeded checkpoint.
"""

import socket
import sys
import threading
import time

import numpy as np
import pytest
import requests
import uvicorn

from modelserver import ALPHABET, TinyMaskedLm, create_app
from seqbeam.provider import MaskedLogitProvider, RemoteProvider
from seqbeam.samplers import BeamConfig, beam_search

SEED = 7
MAX_LENGTH = 64


def _free_port() -> int:
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


@pytest.fixture(scope="module")
def server_url():
    port = _free_port()
    app = create_app(seed=SEED, max_length=MAX_LENGTH)
    config = uvicorn.Config(app, host="127.0.0.1", port=port, log_level="error")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    url = f"http://127.0.0.1:{port}"
    deadline = time.time() + 15
    while time.time() < deadline:
        try:
            if requests.get(url + "/healthz", timeout=1).status_code == 200:
                break
        except requests.RequestException:
            time.sleep(0.05)
    else:
        raise RuntimeError("server did not come up")
    yield url
    server.should_exit = True
    thread.join(timeout=5)


@pytest.fixture(scope="module")
def checkpoint():
    return TinyMaskedLm(seed=SEED, max_length=MAX_LENGTH)


class InProcessAdapter(MaskedLogitProvider):
    """Adapter exposing a local TinyMaskedLm through the provider interface."""

    name = "inprocess:tiny-esm-random"

    def __init__(self, model: TinyMaskedLm):
        super().__init__()
        self._model = model

    def _compute_rows(self, sequence, masked, report):
        rows = self._model.logits(sequence, sorted(masked), list(report))
        return {p: np.asarray(row, dtype=float) for p, row in zip(sorted(report), rows)}


def _random_sequence(rng, length):
    return "".join(rng.choice(list(ALPHABET), length))


# ---------------------------------------------------------------------------
# protocol surface


def test_info_and_health(server_url):
    info = requests.get(server_url + "/info").json()
    assert info == {"name": "tiny-esm-random", "alphabet": ALPHABET,
                    "max_length": MAX_LENGTH}
    assert requests.get(server_url + "/healthz").json() == {"status": "ok"}


def test_logits_shape_and_order(server_url):
    resp = requests.post(server_url + "/logits", json={
        "sequence": "ACDEFG", "masked_positions": [4, 1]
    })
    assert resp.status_code == 200
    logits = resp.json()["logits"]
    assert len(logits) == 2  # sorted position order: 1 then 4
    assert all(len(row) == 20 for row in logits)


def test_error_codes(server_url):
    post = lambda body: requests.post(server_url + "/logits", json=body)
    assert post({"sequence": "ACDZ", "masked_positions": [0]}).status_code == 400
    assert post({"sequence": "ACDE", "masked_positions": [9]}).status_code == 400
    assert post({"sequence": "ACDE", "masked_positions": []}).status_code == 400
    assert post({"sequence": "A" * (MAX_LENGTH + 1),
                 "masked_positions": [0]}).status_code == 422
    assert post({"sequence": "", "masked_positions": []}).status_code == 422
    assert post({"sequence": "ACDE"}).status_code == 400  # empty mask, no report


def test_batch_matches_single(server_url):
    reqs = [
        {"sequence": "ACDEFG", "masked_positions": [2]},
        {"sequence": "WYWYWY", "masked_positions": [], "report_positions": [0, 5]},
    ]
    batch = requests.post(server_url + "/logits_batch",
                          json={"requests": reqs}).json()["results"]
    for req, result in zip(reqs, batch):
        single = requests.post(server_url + "/logits", json=req).json()
        assert single["logits"] == result["logits"]


def test_checkpoint_deterministic_across_instances():
    a = TinyMaskedLm(seed=SEED, max_length=MAX_LENGTH)
    b = TinyMaskedLm(seed=SEED, max_length=MAX_LENGTH)
    ra = a.logits("ACDEFGHIKL", [3], [3])
    rb = b.logits("ACDEFGHIKL", [3], [3])
    assert ra == rb
    c = TinyMaskedLm(seed=SEED + 1, max_length=MAX_LENGTH)
    assert c.logits("ACDEFGHIKL", [3], [3]) != ra


# ---------------------------------------------------------------------------
# criterion 11: loopback fidelity


def test_criterion_11_loopback_fidelity(server_url, checkpoint):
    try:
        remote = RemoteProvider(server_url)
        rng = np.random.default_rng(711)
        # rows through the client match direct model calls within 1e-6
        for _ in range(20):
            L = int(rng.integers(4, 30))
            seq = _random_sequence(rng, L)
            masked = sorted(rng.choice(L, size=int(rng.integers(1, 4)),
                                       replace=False).tolist())
            rows = remote.query(seq, masked)
            direct = checkpoint.logits(seq, masked, masked)
            for p, row in zip(masked, direct):
                assert np.allclose(rows[p], row, atol=1e-6)
            report = sorted(rng.choice(L, size=2, replace=False).tolist())
            rows = remote.query(seq, [], report_positions=report)
            direct = checkpoint.logits(seq, [], report)
            for p, row in zip(report, direct):
                assert np.allclose(rows[p], row, atol=1e-6)

        # a beam run through the remote path equals the in-process run
        seed_seq = _random_sequence(np.random.default_rng(712), 16)
        config = BeamConfig(edit_budget=2, rng_seed=3, beam_size=3, tau=1.5)
        remote_run = beam_search(remote, "s", seed_seq, config)
        local_run = beam_search(InProcessAdapter(checkpoint), "s", seed_seq, config)
        assert len(remote_run.entries) == len(local_run.entries)
        for re_, le in zip(remote_run.entries, local_run.entries):
            assert re_.candidate.sequence == le.candidate.sequence
            assert re_.candidate.edits == le.candidate.edits
            assert re_.clean.sum_log == pytest.approx(le.clean.sum_log, abs=1e-6)
            assert re_.perturbed == pytest.approx(le.perturbed, abs=1e-6)
            assert re_.step == le.step
    except BaseException:
        print("[criterion 11] remote/in-process loopback fidelity: FAIL",
              file=sys.stderr)
        raise
    print("[criterion 11] remote/in-process loopback fidelity: PASS")
