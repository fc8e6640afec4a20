"""Thin HTTP client for the simulation service.

Wraps any httpx-compatible client (a real `httpx.Client` in the CLI, a
`fastapi.testclient.TestClient` in tests) and raises on non-2xx responses.
"""

from __future__ import annotations

import os

import httpx

DEFAULT_SERVER = os.environ.get("PTSBE_SERVER", "http://127.0.0.1:8976")


class ServiceError(RuntimeError):
    def __init__(self, status_code: int, detail):
        super().__init__(f"server returned {status_code}: {detail}")
        self.status_code = status_code
        self.detail = detail


class ServiceClient:
    """Typed access to the service endpoints over a provided HTTP client."""

    def __init__(self, http):
        self._http = http

    @classmethod
    def connect(cls, base_url: str = DEFAULT_SERVER) -> "ServiceClient":
        # runs can take minutes; never time out client-side
        return cls(httpx.Client(base_url=base_url, timeout=None))

    def _post(self, path: str, payload: dict) -> dict:
        resp = self._http.post(path, json=payload)
        if resp.status_code >= 400:
            try:
                detail = resp.json().get("detail")
            except Exception:
                detail = resp.text
            raise ServiceError(resp.status_code, detail)
        return resp.json()

    def health(self) -> dict:
        resp = self._http.get("/health")
        if resp.status_code >= 400:
            raise ServiceError(resp.status_code, resp.text)
        return resp.json()

    def random_circuit(
        self,
        n: int,
        g: int,
        two_qubit_fraction: float = 0.2,
        p_range: tuple[float, float] = (0.02, 0.2),
        seed: int = 0,
        instance: int = 0,
    ) -> dict:
        return self._post(
            "/circuits/random",
            {
                "n": n,
                "g": g,
                "two_qubit_fraction": two_qubit_fraction,
                "p_range": list(p_range),
                "seed": seed,
                "instance": instance,
            },
        )

    def run(self, circuit: dict, config: dict, use_shared_cache: bool = True) -> dict:
        return self._post(
            "/runs",
            {"circuit": circuit, "config": config, "use_shared_cache": use_shared_cache},
        )

    def sweep(
        self,
        ns: list[int],
        gs: list[int],
        modes: list[str],
        config: dict,
        circuits_per_point: int = 10,
        seed: int = 0,
        circuits: list[dict] | None = None,
        two_qubit_fraction: float = 0.2,
        p_range: tuple[float, float] = (0.02, 0.2),
        point_workers: int = 1,
    ) -> dict:
        return self._post(
            "/sweeps",
            {
                "ns": ns,
                "gs": gs,
                "modes": modes,
                "config": config,
                "circuits_per_point": circuits_per_point,
                "seed": seed,
                "circuits": circuits,
                "two_qubit_fraction": two_qubit_fraction,
                "p_range": list(p_range),
                "point_workers": point_workers,
            },
        )

    def batch_curve(
        self,
        circuit: dict,
        b_values: list[int],
        hypersamples: int = 100,
        seed: int = 0,
        reps: int = 3,
    ) -> dict:
        return self._post(
            "/batch-curve",
            {
                "circuit": circuit,
                "b_values": b_values,
                "hypersamples": hypersamples,
                "seed": seed,
                "reps": reps,
            },
        )
