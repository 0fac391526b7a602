"""Chat-completion clients: one OpenAI-compatible HTTP backend and the
deterministic offline stubs the test suite and stub mode run against.

Stub modes:
  * ScriptedStubClient  — replays canned reply files in order.
  * RuleStubClient      — generates a valid proposal from the machine-readable
                          context block embedded in each stage prompt.
  * FaultInjectionClient — wraps another client and emits malformed output
                           with a configured probability.
"""

from __future__ import annotations

import json
import math
import os
import random
import re
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

import httpx

from .banks import STYLE_BANK
from .errors import (ChatAuthError, ChatBackendError, ChatTimeoutError,
                     ChatTransportError)

ENV_ENDPOINT = "DECOR_LLM_ENDPOINT"
ENV_API_KEY = "DECOR_LLM_API_KEY"
ENV_MODEL = "DECOR_LLM_MODEL"

CONTEXT_BEGIN = "BEGIN CONTEXT"
CONTEXT_END = "END CONTEXT"

_RETRY_STATUS = {429, 500, 502, 503, 504}


@dataclass
class ChatRequest:
    model: str
    messages: list[dict]
    response_schema: str | None = None
    temperature: float = 0.0
    seed: int | None = None
    timeout_s: float = 60.0

    def __post_init__(self):
        if not self.messages:
            raise ValueError("messages must be non-empty")
        if self.timeout_s <= 0:
            raise ValueError("timeout_s must be positive")


@dataclass
class ChatResponse:
    content: str
    finish_reason: str = "stop"
    usage: dict = field(default_factory=lambda: {"prompt_tokens": 0,
                                                 "completion_tokens": 0})


class HttpChatClient:
    """OpenAI-compatible chat-completions backend.

    Transient transport failures (timeouts, connection errors, 429/5xx) are
    retried up to ``max_retries`` times with exponential backoff from a 0.5 s
    base.  Schema-level problems are never retried here; validators own those.
    """

    def __init__(self, endpoint: str | None = None, api_key: str | None = None,
                 model: str | None = None, max_retries: int = 3,
                 backoff_base_s: float = 0.5, transport=None, sleep=time.sleep):
        self.endpoint = endpoint or os.environ.get(ENV_ENDPOINT, "")
        self.api_key = api_key if api_key is not None else os.environ.get(ENV_API_KEY, "")
        self.model = model or os.environ.get(ENV_MODEL, "")
        self.max_retries = max_retries
        self.backoff_base_s = backoff_base_s
        self._sleep = sleep
        if not self.endpoint:
            raise ChatBackendError(f"no endpoint configured (set {ENV_ENDPOINT})")
        self._client = httpx.Client(transport=transport)

    def _url(self) -> str:
        base = self.endpoint.rstrip("/")
        if base.endswith("/chat/completions"):
            return base
        return base + "/v1/chat/completions"

    def complete(self, request: ChatRequest) -> ChatResponse:
        payload: dict = {
            "model": request.model or self.model,
            "messages": request.messages,
            "temperature": request.temperature,
        }
        if request.seed is not None:
            payload["seed"] = request.seed
        if request.response_schema:
            payload["response_format"] = {
                "type": "json_schema",
                "json_schema": {"name": "stage_output", "strict": False,
                                "schema": json.loads(request.response_schema)},
            }
        headers = {}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"

        last_exc: Exception | None = None
        for attempt in range(self.max_retries + 1):
            if attempt:
                self._sleep(self.backoff_base_s * 2 ** (attempt - 1))
            try:
                resp = self._client.post(self._url(), json=payload,
                                         headers=headers, timeout=request.timeout_s)
            except httpx.TimeoutException as exc:
                last_exc = ChatTimeoutError(f"request timed out: {exc}")
                continue
            except httpx.TransportError as exc:
                last_exc = ChatTransportError(f"transport failure: {exc}")
                continue
            if resp.status_code in (401, 403):
                raise ChatAuthError(f"backend rejected credential (HTTP {resp.status_code})")
            if resp.status_code in _RETRY_STATUS:
                last_exc = ChatTransportError(f"backend returned HTTP {resp.status_code}")
                continue
            if resp.status_code != 200:
                raise ChatBackendError(f"backend returned HTTP {resp.status_code}: {resp.text[:200]}")
            return self._parse(resp.json())
        raise last_exc if last_exc else ChatTransportError("request failed")

    @staticmethod
    def _parse(data: dict) -> ChatResponse:
        try:
            choice = data["choices"][0]
            content = choice["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ChatBackendError(f"malformed backend response: {exc}") from exc
        if not content:
            raise ChatBackendError("backend returned empty content")
        usage = data.get("usage", {})
        return ChatResponse(
            content=content,
            finish_reason=choice.get("finish_reason", "stop"),
            usage={"prompt_tokens": int(usage.get("prompt_tokens", 0)),
                   "completion_tokens": int(usage.get("completion_tokens", 0))},
        )


class ScriptedStubClient:
    """Replays scripted reply contents in order; deterministic by construction."""

    def __init__(self, replies: list[str] | None = None,
                 fixtures_dir: str | Path | None = None):
        if fixtures_dir is not None:
            files = sorted(Path(fixtures_dir).glob("*.json"))
            replies = [f.read_text(encoding="utf-8") for f in files]
        self.replies = list(replies or [])
        self.calls: list[ChatRequest] = []
        self._cursor = 0
        self._lock = threading.Lock()

    def complete(self, request: ChatRequest) -> ChatResponse:
        with self._lock:
            self.calls.append(request)
            if self._cursor >= len(self.replies):
                raise ChatBackendError("scripted stub exhausted its replies")
            content = self.replies[self._cursor]
            self._cursor += 1
        return ChatResponse(content=content)


class FaultInjectionClient:
    """Emits malformed content with probability ``p``, else delegates."""

    _CORRUPT = ('{"assets": [', "this is not json",
                '{"directives": 42}', '{"assignments": "none"}')

    def __init__(self, inner, p: float, seed: int = 0):
        if not 0.0 <= p <= 1.0:
            raise ValueError("p must be in [0, 1]")
        self.inner = inner
        self.p = p
        self._rng = random.Random(seed)
        self._lock = threading.Lock()
        self.faults_emitted = 0

    def complete(self, request: ChatRequest) -> ChatResponse:
        with self._lock:
            fault = self._rng.random() < self.p
            pick = self._rng.randrange(len(self._CORRUPT)) if fault else 0
            if fault:
                self.faults_emitted += 1
        if fault:
            return ChatResponse(content=self._CORRUPT[pick])
        return self.inner.complete(request)


class RuleStubClient:
    """Deterministic proposal generator for fully offline runs.

    Stage prompts embed a JSON context block between BEGIN CONTEXT and
    END CONTEXT markers; the generator parses it and produces output that
    passes the corresponding validator on the first attempt.
    """

    def complete(self, request: ChatRequest) -> ChatResponse:
        ctx = self._context(request)
        stage = ctx.get("stage")
        if stage == "select":
            out = _gen_select(ctx)
        elif stage == "stylize":
            out = _gen_stylize(ctx)
        elif stage == "plan":
            out = _gen_plan(ctx)
        elif stage == "edit":
            out = _gen_edit(ctx)
        else:
            raise ChatBackendError(f"rule stub cannot handle stage {stage!r}")
        return ChatResponse(content=json.dumps(out, sort_keys=True))

    @staticmethod
    def _context(request: ChatRequest) -> dict:
        for msg in request.messages:
            content = msg.get("content", "")
            if CONTEXT_BEGIN in content:
                block = content.split(CONTEXT_BEGIN, 1)[1].split(CONTEXT_END, 1)[0]
                return json.loads(block)
        raise ChatBackendError("rule stub found no context block in the prompt")


# --- rule-based generation -------------------------------------------------

# name, footprint aspect (w/d), height relative to the larger footprint side
_NAME_BANK = (
    ("table lamp", 1.0, 1.6),
    ("picture frame", 1.6, 1.1),
    ("potted plant", 1.0, 1.3),
    ("alarm clock", 1.2, 0.9),
    ("stack of books", 1.3, 0.7),
    ("decorative box", 1.3, 0.5),
    ("vase of sunflower", 1.0, 1.8),
    ("candle holder", 1.0, 1.4),
    ("photo album", 1.4, 0.25),
    ("small globe", 1.0, 1.2),
    ("desk organizer", 1.6, 0.6),
    ("ceramic figurine", 0.8, 1.5),
    ("tea set tray", 1.5, 0.4),
    ("succulent pot", 1.0, 0.9),
    ("jewelry dish", 1.2, 0.3),
    ("tissue box", 1.5, 0.5),
)

_MATERIAL_ROTATION = ("wood", "steel", "glass", "textile", "plastic", "bronze")


def _apportion(n: int, weights: list[float]) -> list[int]:
    """Largest-remainder apportionment; every bin gets >= 1 when n >= bins."""
    k = len(weights)
    if n <= 0 or k == 0:
        return [0] * k
    if n < k:
        order = sorted(range(k), key=lambda i: (-weights[i], i))
        counts = [0] * k
        for i in order[:n]:
            counts[i] = 1
        return counts
    total = sum(weights) or 1.0
    raw = [n * w / total for w in weights]
    counts = [max(1, int(math.floor(r))) for r in raw]
    while sum(counts) > n:
        i = max(range(k), key=lambda i: (counts[i] - raw[i], counts[i], -i))
        if counts[i] > 1:
            counts[i] -= 1
        else:
            break
    remainders = sorted(range(k), key=lambda i: (raw[i] - counts[i], weights[i], -i),
                        reverse=True)
    idx = 0
    while sum(counts) < n:
        counts[remainders[idx % k]] += 1
        idx += 1
    return counts


def _gen_select(ctx: dict) -> dict:
    surfaces = ctx["surfaces"]
    n = int(ctx["n_assets"])
    seed = int(ctx.get("seed", 0))
    counts = _apportion(n, [float(s["area_cm2"]) for s in surfaces])

    assets = []
    pick = seed
    for s, count in zip(surfaces, counts):
        if count == 0:
            continue
        area = float(s["area_cm2"])
        sw, sd = float(s["width_cm"]), float(s["depth_cm"])
        budget = 0.42 * area
        h_cap = _height_clearance(s, surfaces)
        weights = [1.6] + [max(0.4, 1.0 - 0.08 * i) for i in range(count - 1)]
        wsum = sum(weights)
        for k in range(count):
            name, aspect, hratio = _NAME_BANK[pick % len(_NAME_BANK)]
            pick += 1
            target = budget * weights[k] / wsum
            w = math.sqrt(target * aspect)
            d = math.sqrt(target / aspect)
            w, d = _clamp_dims(w, d, sw, sd)
            h = min(h_cap, max(2.0, hratio * max(w, d)))
            assets.append({
                "name": name,
                "width_cm": round(w, 1),
                "depth_cm": round(d, 1),
                "height_cm": round(h, 1),
                "surface_index": int(s["index"]),
            })
    return {"assets": assets}


def _height_clearance(surface: dict, surfaces: list[dict]) -> float:
    """Keep suggested assets below any higher surface hanging over this one."""
    cap = 80.0
    mine = surface.get("bbox")
    h0 = float(surface["height_cm"])
    for other in surfaces:
        if other is surface or float(other["height_cm"]) <= h0:
            continue
        theirs = other.get("bbox")
        if mine and theirs:
            overlap = (mine["min_x"] < theirs["max_x"] and theirs["min_x"] < mine["max_x"]
                       and mine["min_y"] < theirs["max_y"] and theirs["min_y"] < mine["max_y"])
            if not overlap:
                continue
        cap = min(cap, float(other["height_cm"]) - h0 - 2.0)
    return max(cap, 2.0)


def _clamp_dims(w: float, d: float, sw: float, sd: float) -> tuple[float, float]:
    """Shrink (w, d) preserving aspect so the asset clears the surface bounds
    with the solver's 1 cm edge margin to spare."""
    lo_cap = max(2.0, 0.9 * (min(sw, sd) - 3.0))
    hi_cap = max(2.0, 0.9 * (max(sw, sd) - 3.0))
    lo, hi = min(w, d), max(w, d)
    scale = min(1.0, lo_cap / lo if lo > lo_cap else 1.0,
                hi_cap / hi if hi > hi_cap else 1.0)
    w, d = max(2.0, w * scale), max(2.0, d * scale)
    return w, d


def _gen_stylize(ctx: dict) -> dict:
    assets = ctx.get("assets", [])
    seed = int(ctx.get("seed", 0))
    style = STYLE_BANK[seed % len(STYLE_BANK)]
    assignments = []
    for i, a in enumerate(assets):
        assignments.append({
            "id": a["id"],
            "style": style,
            "material": _MATERIAL_ROTATION[(seed + i) % len(_MATERIAL_ROTATION)],
        })
    return {"assignments": assignments}


def _gen_plan(ctx: dict) -> dict:
    assets = ctx.get("assets", [])
    surfaces = {int(s["index"]): s for s in ctx["surfaces"]}
    seed = int(ctx.get("seed", 0))
    margin = 1.0

    by_surface: dict[int, list[dict]] = {}
    for a in assets:
        by_surface.setdefault(int(a["surface_index"]), []).append(a)

    directives = []
    for sidx in sorted(by_surface):
        group = sorted(by_surface[sidx],
                       key=lambda a: (-float(a["width_cm"]) * float(a["depth_cm"]), a["id"]))
        s = surfaces[sidx]
        sw, sd = float(s["width_cm"]), float(s["depth_cm"])
        anchor = group[0]
        if _center_leaves_room(anchor, group[1:], sw, sd, margin):
            directives.append({"subject": anchor["id"], "kind": "global_region",
                               "region": "C"})
        directives.append({"subject": anchor["id"], "kind": "orientation",
                           "direction": "forward"})

        stacked_id = None
        if len(group) >= 3:
            cand = group[-1]
            if (min(float(cand["width_cm"]), float(cand["depth_cm"]))
                    <= 0.8 * min(float(anchor["width_cm"]), float(anchor["depth_cm"]))
                    and max(float(cand["width_cm"]), float(cand["depth_cm"]))
                    <= 0.8 * max(float(anchor["width_cm"]), float(anchor["depth_cm"]))):
                stacked_id = cand["id"]
                directives.append({"subject": stacked_id, "kind": "relative_position",
                                   "relation": "on_top_of", "reference": anchor["id"]})

        rest = [a for a in group[1:] if a["id"] != stacked_id]
        for k, a in enumerate(rest):
            aw, ad = float(a["width_cm"]), float(a["depth_cm"])
            anchor_d = float(anchor["depth_cm"])
            anchor_w = float(anchor["width_cm"])
            if k == 0 and _front_fits(anchor_d, ad, sd, margin):
                directives.append({"subject": a["id"], "kind": "relative_position",
                                   "relation": "in_front_of", "reference": anchor["id"]})
                directives.append({"subject": a["id"], "kind": "alignment",
                                   "relation": "vertical_mid", "reference": anchor["id"]})
            elif k == 1 and _side_fits(anchor_w, aw, sw, margin):
                directives.append({"subject": a["id"], "kind": "relative_position",
                                   "relation": "right_of", "reference": anchor["id"]})
                directives.append({"subject": a["id"], "kind": "distance",
                                   "relation": "near", "reference": anchor["id"]})
            elif k % 2 == 0:
                directives.append({"subject": a["id"], "kind": "distance",
                                   "relation": "near", "reference": rest[k - 1]["id"] if k else anchor["id"]})
            else:
                directives.append({"subject": a["id"], "kind": "alignment",
                                   "relation": "horizontal_mid", "reference": anchor["id"]})
            if (seed + k) % 4 == 0:
                directives.append({"subject": a["id"], "kind": "orientation",
                                   "direction": ("forward", "left", "right", "backward")[(seed + k) % 4]})
    return {"directives": directives}


def _center_leaves_room(anchor: dict, others: list[dict], sw: float, sd: float,
                        margin: float) -> bool:
    """Pinning the anchor's center to the middle cell must leave the largest
    neighbor a strip along some axis, else skip the global directive."""
    if not others:
        return True
    aw = float(anchor["width_cm"])
    ad = float(anchor["depth_cm"])
    need = max(min(float(o["width_cm"]), float(o["depth_cm"])) for o in others)
    room_x = 2.0 * sw / 3.0 - aw / 2.0 - 2.0 * margin - 2.0
    room_y = 2.0 * sd / 3.0 - ad / 2.0 - 2.0 * margin - 2.0
    return room_x >= need or room_y >= need


def _front_fits(anchor_depth: float, subj_depth: float, surf_depth: float,
                margin: float) -> bool:
    # anchor center may sit at the top of the C band when its half depth and
    # margin fit in one third of the surface depth
    if anchor_depth / 2.0 + margin > surf_depth / 3.0:
        return False
    room = 2.0 * surf_depth / 3.0 - anchor_depth / 2.0 - margin
    return subj_depth + 2.0 <= room


def _side_fits(anchor_width: float, subj_width: float, surf_width: float,
               margin: float) -> bool:
    if anchor_width / 2.0 + margin > surf_width / 3.0:
        return False
    room = 2.0 * surf_width / 3.0 - anchor_width / 2.0 - margin
    return subj_width + 2.0 <= room


_EDIT_PATTERNS = (
    ("remove", re.compile(r"\b(?:remove|delete)\s+(?:the\s+)?(?P<target>.+?)\s*$")),
    ("replace", re.compile(r"\breplace\s+(?:the\s+)?(?P<target>.+?)\s+with\s+(?:a\s+|an\s+)?(?P<new>.+?)\s*$")),
    ("insert", re.compile(r"\b(?:insert|add)\s+(?:a\s+|an\s+)?(?P<new>.+?)(?:\s+on\s+surface\s+(?P<surface>\d+))?\s*$")),
    ("resize", re.compile(r"\b(?:make|resize)\s+(?:the\s+)?(?P<target>.+?)\s+(?P<how>smaller|bigger|larger)\s*$")),
    ("rotate", re.compile(r"\brotate\s+(?:the\s+)?(?P<target>.+?)(?:\s+to\s+(?:the\s+)?(?P<dir>left|right|backward|forward))?\s*$")),
    ("move_region", re.compile(r"\bmove\s+(?:the\s+)?(?P<target>.+?)\s+to\s+(?:the\s+)?(?P<region>NW|N|NE|W|C|E|SW|S|SE)\b", re.IGNORECASE)),
    ("move_near", re.compile(r"\bmove\s+(?:the\s+)?(?P<target>.+?)\s+(?:near|next\s+to)\s+(?:the\s+)?(?P<ref>.+?)\s*$")),
)


def _gen_edit(ctx: dict) -> dict:
    instruction = ctx.get("instruction", "").strip().lower()
    inventory = ctx.get("assets", [])
    surfaces = ctx.get("surfaces", [])

    for kind, pattern in _EDIT_PATTERNS:
        m = pattern.search(instruction)
        if not m:
            continue
        groups = m.groupdict()
        if kind == "remove":
            return {"ops": [{"kind": "remove",
                             "target": _resolve(groups["target"], inventory)}]}
        if kind == "replace":
            target = _resolve(groups["target"], inventory)
            entry = _find(target, inventory)
            draft = _draft(groups["new"], surfaces, like=entry)
            return {"ops": [{"kind": "replace", "target": target, "asset": draft}]}
        if kind == "resize":
            target = _resolve(groups["target"], inventory)
            entry = _find(target, inventory)
            factor = 0.7 if groups["how"] == "smaller" else 1.3
            dims = {"width_cm": round(float(entry["width_cm"]) * factor, 1),
                    "depth_cm": round(float(entry["depth_cm"]) * factor, 1),
                    "height_cm": round(float(entry["height_cm"]) * factor, 1)} if entry else {}
            return {"ops": [{"kind": "resize", "target": target, "dims": dims}]}
        if kind == "rotate":
            return {"ops": [{"kind": "rotate",
                             "target": _resolve(groups["target"], inventory),
                             "direction": groups.get("dir") or "left"}]}
        if kind == "move_region":
            target = _resolve(groups["target"], inventory)
            return {"ops": [{"kind": "reposition", "target": target,
                             "directives": [{"subject": target, "kind": "global_region",
                                             "region": groups["region"].upper()}]}]}
        if kind == "move_near":
            target = _resolve(groups["target"], inventory)
            ref = _resolve(groups["ref"], inventory)
            return {"ops": [{"kind": "reposition", "target": target,
                             "directives": [{"subject": target, "kind": "distance",
                                             "relation": "near", "reference": ref}]}]}
        if kind == "insert":
            sidx = groups.get("surface")
            draft = _draft(groups["new"], surfaces,
                           surface_index=int(sidx) if sidx else None)
            return {"ops": [{"kind": "insert", "asset": draft}]}
    return {"ops": []}


def _resolve(phrase: str, inventory: list[dict]) -> str:
    """Best name match in the scene inventory; the raw phrase when nothing
    matches (the validator reports it as unresolvable)."""
    tokens = set(re.findall(r"[a-z0-9]+", phrase.lower()))
    best_id, best_score = None, 0
    for a in sorted(inventory, key=lambda a: a["id"]):
        name_tokens = set(re.findall(r"[a-z0-9]+", a["name"].lower()))
        score = len(tokens & name_tokens)
        if score > best_score:
            best_id, best_score = a["id"], score
    return best_id if best_id is not None else phrase.strip()


def _find(asset_id: str, inventory: list[dict]) -> dict | None:
    for a in inventory:
        if a["id"] == asset_id:
            return a
    return None


def _draft(name: str, surfaces: list[dict], like: dict | None = None,
           surface_index: int | None = None) -> dict:
    if like is not None:
        return {"name": name.strip(), "width_cm": float(like["width_cm"]),
                "depth_cm": float(like["depth_cm"]),
                "height_cm": float(like["height_cm"]),
                "surface_index": int(like["surface_index"])}
    if surface_index is None and surfaces:
        surface_index = int(max(surfaces, key=lambda s: float(s["area_cm2"]))["index"])
    surf = next((s for s in surfaces if int(s["index"]) == surface_index), None)
    side = 12.0
    if surf is not None:
        side = max(5.0, min(25.0, 0.08 * math.sqrt(float(surf["area_cm2"]))))
    return {"name": name.strip(), "width_cm": round(side, 1),
            "depth_cm": round(side, 1), "height_cm": round(1.4 * side, 1),
            "surface_index": int(surface_index or 0)}
