"""INI run configuration shared by the ``train`` and ``ablate`` commands.

::

    [data]
    columns = surface, pos, chunk, label

    [features]            ; defaults for every run
    word = yes
    word_shapes = yes
    pos = yes
    chunk = yes
    cluster = yes
    embeddings = yes
    affix_max_len = 4
    window_radius = 2
    cluster_prefix_lengths = 4, 6, 8, 10

    [train]
    c2 = 3.2
    epochs = 10
    seed = 42
    eta0 =                ; empty: calibrate
    min_count = 1
    shuffle = yes

    [lexicons]            ; paths relative to this file
    clusters = clusters.txt
    embeddings = embeddings.txt

    [ablation: word+shapes]
    pos = no
    chunk = no
    cluster = no
    embeddings = no

Each ``[ablation: NAME]`` section overrides ``[features]`` for one row of
the ablation table; rows keep file order.
"""
from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple

from .corpus import Layout
from .crf import Lexicons, TrainConfig
from .evaluation import AblationSpec
from .features import FeatureConfig, load_clusters, load_embeddings

ABLATION_PREFIX = "ablation:"
_BOOL_KEYS = ("word", "word_shapes", "pos", "chunk", "cluster", "embeddings")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    layout: Layout = field(default_factory=Layout)
    features: FeatureConfig = field(default_factory=FeatureConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    clusters_path: Optional[str] = None
    embeddings_path: Optional[str] = None
    ablation: Optional[AblationSpec] = None
    seed_set: bool = False  # whether [train] seed was given explicitly

    def load_lexicons(self) -> Lexicons:
        lex = Lexicons()
        if self.clusters_path:
            with open(self.clusters_path, encoding="utf-8") as f:
                lex.clusters = load_clusters(f)
        if self.embeddings_path:
            with open(self.embeddings_path, encoding="utf-8") as f:
                lex.embeddings = load_embeddings(f)
        return lex

    def check(self, fcfg: FeatureConfig, where: str = "[features]") -> None:
        for toggle in ("pos", "chunk"):
            if getattr(fcfg, toggle) and toggle not in self.layout:
                raise ConfigError(f"{where}: '{toggle}' is enabled but the layout has no {toggle} column")
        if fcfg.cluster and not self.clusters_path:
            raise ConfigError(f"{where}: 'cluster' is enabled but [lexicons] clusters is not set")
        if fcfg.embeddings and not self.embeddings_path:
            raise ConfigError(f"{where}: 'embeddings' is enabled but [lexicons] embeddings is not set")


def _features(section, base: FeatureConfig, where: str) -> FeatureConfig:
    kwargs = {}
    try:
        for key in section:
            if key in _BOOL_KEYS:
                kwargs[key] = section.getboolean(key)
            elif key in ("affix_max_len", "window_radius"):
                kwargs[key] = section.getint(key)
            elif key == "cluster_prefix_lengths":
                kwargs[key] = tuple(int(x) for x in section[key].replace(",", " ").split())
            else:
                raise ConfigError(f"{where}: unknown key {key!r}")
        return replace(base, **kwargs)
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{where}: {exc}") from None


def _train(section) -> Tuple[TrainConfig, bool]:
    kwargs = {}
    try:
        for key, value in section.items():
            value = value.strip()
            if key in ("c2",):
                kwargs[key] = float(value)
            elif key in ("eta0", "decay"):
                kwargs[key] = float(value) if value else None
            elif key in ("epochs", "seed", "min_count", "calibration_samples"):
                kwargs[key] = int(value)
            elif key == "shuffle":
                kwargs[key] = section.getboolean(key)
            else:
                raise ConfigError(f"[train]: unknown key {key!r}")
        return TrainConfig(**kwargs), "seed" in kwargs
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"[train]: {exc}") from None


def _path(base_dir: str, value: str, key: str) -> Optional[str]:
    value = value.strip()
    if not value:
        return None
    path = os.path.normpath(os.path.join(base_dir, value))
    if not os.path.exists(path):
        raise ConfigError(f"[lexicons] {key}: file not found: {path}")
    return path


def parse_config(text: str, base_dir: str = ".") -> RunConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None

    cfg = RunConfig()
    known = {"data", "features", "train", "lexicons"}
    for name in parser.sections():
        if name not in known and not name.startswith(ABLATION_PREFIX):
            raise ConfigError(f"unknown section [{name}]")
    if parser.has_option("data", "columns"):
        try:
            cfg.layout = Layout.parse(parser["data"]["columns"])
        except ValueError as exc:
            raise ConfigError(f"[data] columns: {exc}") from None
    if parser.has_section("features"):
        cfg.features = _features(parser["features"], FeatureConfig(), "[features]")
    if parser.has_section("train"):
        cfg.train, cfg.seed_set = _train(parser["train"])
    if parser.has_section("lexicons"):
        lex = parser["lexicons"]
        for key in lex:
            if key not in ("clusters", "embeddings"):
                raise ConfigError(f"[lexicons]: unknown key {key!r}")
        cfg.clusters_path = _path(base_dir, lex.get("clusters", ""), "clusters")
        cfg.embeddings_path = _path(base_dir, lex.get("embeddings", ""), "embeddings")

    variants: List[Tuple[str, FeatureConfig]] = []
    for name in parser.sections():
        if name.startswith(ABLATION_PREFIX):
            row = name[len(ABLATION_PREFIX):].strip()
            if not row:
                raise ConfigError(f"[{name}]: empty ablation name")
            variants.append((row, _features(parser[name], cfg.features, f"[{name}]")))
    if variants:
        try:
            cfg.ablation = AblationSpec(variants)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    cfg.check(cfg.features)
    for row, fcfg in variants:
        cfg.check(fcfg, f"[{ABLATION_PREFIX} {row}]")
    return cfg


def load_config(path: str) -> RunConfig:
    with open(path, encoding="utf-8") as f:
        text = f.read()
    return parse_config(text, os.path.dirname(os.path.abspath(path)))
