"""``fedwh`` command line: integrate, query, check.

Exit status is 0 on success, 1 for domain errors (bad input files, failed
integration, unanswerable queries) and 2 for usage errors. Payloads go to
stdout, diagnostics to stderr.

The federation config is a JSON file; relative paths resolve against the
config file's directory::

    {
      "components": ["dw1", "dw2"],
      "ontologies": ["ontology/dw1.onto", "ontology/federation.onto"],
      "overrides": "ontology/expert.txt",
      "catalog": "catalog.json"
    }
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path

from .errors import FederationError
from .executor import execute_federated, load_tables
from .integrator import FederationCatalog, build_federation, mapping_report
from .ontology import load_repository
from .query_planner import explain, parse_query
from .schema_model import load_component


class UsageError(Exception):
    pass


@dataclass
class FederationConfig:
    component_dirs: list[Path]
    ontology_files: list[Path]
    override_file: Path | None
    catalog_out: Path

    @classmethod
    def load(cls, path: str | Path) -> "FederationConfig":
        path = Path(path)
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise UsageError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise UsageError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None
        if not isinstance(doc, dict):
            raise UsageError(f"{path}: config must be a JSON object")
        base = path.parent

        def paths(key: str) -> list[Path]:
            value = doc.get(key, [])
            if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
                raise UsageError(f"{path}: {key!r} must be a list of paths")
            return [base / v for v in value]

        components = paths("components")
        if not components:
            raise UsageError(f"{path}: at least one component directory is required")
        overrides = doc.get("overrides")
        if overrides is not None and not isinstance(overrides, str):
            raise UsageError(f"{path}: 'overrides' must be a path or null")
        return cls(
            component_dirs=components,
            ontology_files=paths("ontologies"),
            override_file=base / overrides if overrides else None,
            catalog_out=base / doc.get("catalog", "catalog.json"),
        )

    def load_inputs(self):
        repo = load_repository(self.ontology_files, self.override_file)
        components = [load_component(d) for d in self.component_dirs]
        return repo, components


def cmd_integrate(args: argparse.Namespace) -> int:
    config = FederationConfig.load(args.config)
    repo, components = config.load_inputs()
    catalog = build_federation(components, repo)
    out = Path(args.out) if args.out else config.catalog_out
    out.write_text(catalog.to_json(), encoding="utf-8")
    report = mapping_report(catalog)
    sys.stdout.write(report.to_json() if args.format == "json" else report.to_text())
    print(f"wrote {out}", file=sys.stderr)
    return 0


def cmd_query(args: argparse.Namespace) -> int:
    config = FederationConfig.load(args.config)
    repo, components = config.load_inputs()
    try:
        text = Path(args.catalog).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise UsageError(f"catalog file not found: {args.catalog}") from None
    catalog = FederationCatalog.from_json(text)
    catalog.attach_components(components)
    q = parse_query(args.query)
    if args.explain:
        sys.stdout.write(explain(q, catalog, repo))
        return 0
    tables = {c.component_id: load_tables(c) for c in catalog.components}
    result = execute_federated(q, catalog, repo, tables)
    for w in result.warnings:
        print(f"warning: {w}", file=sys.stderr)
    if result.dropped_rows:
        print(f"warning: {result.dropped_rows} fact rows dropped on dangling foreign keys", file=sys.stderr)
    sys.stdout.write(result.to_json() if args.format == "json" else result.to_csv())
    return 0


def cmd_check(args: argparse.Namespace) -> int:
    config = FederationConfig.load(args.config)
    repo, components = config.load_inputs()
    for comp in components:
        load_tables(comp)
    report = mapping_report(build_federation(components, repo))
    for w in report.warnings:
        print(f"warning: unmatched {w['kind']} {w['name']} at {w['location']}", file=sys.stderr)
    print("OK")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fedwh", description="Ontology-driven data warehouse federation.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("integrate", help="build the federated catalog")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="catalog path (default: the config's 'catalog')")
    p.add_argument("--format", choices=("text", "json"), default="text", help="mapping report format")
    p.set_defaults(func=cmd_integrate)

    p = sub.add_parser("query", help="answer a federated query")
    p.add_argument("--catalog", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--explain", action="store_true", help="print the plan without executing")
    p.add_argument("query")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("check", help="validate inputs without writing a catalog")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_check)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"fedwh: usage error: {exc}", file=sys.stderr)
        return 2
    except FederationError as exc:
        print(f"fedwh: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"fedwh: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
