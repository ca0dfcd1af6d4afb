"""Command-line entry point.

Long-running commands (`realm run`, `kas run`, `tgs run`, `producer
run`) each host one piece of a realm over TCP; `consumer get` fetches a
name through the router and writes the payload to stdout; `admin ...`
edits the store files; `bench ...` runs the performance suites and
renders their reports.
"""

from __future__ import annotations

import argparse
import base64
import dataclasses
import sys
import threading
from pathlib import Path

from .. import crypto
from ..errors import NamegateError
from ..names import parse_name, parse_namespace
from ..services import (
    PkUser,
    PolicyStore,
    ProducerEntry,
    ProducerRegistry,
    PwdUser,
    UserStore,
)
from . import bench as bench_mod
from . import realm as realm_mod


def _add_config(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--config", default="realm.ini", metavar="PATH",
        help="realm config file (default: ./realm.ini)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="namegate",
        description="namespace-gated content fetching over interest networks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    realm = sub.add_parser("realm", help="create or run a realm").add_subparsers(
        dest="action", required=True
    )
    realm_init = realm.add_parser("init", help="write a runnable demo realm")
    realm_init.add_argument("directory")
    realm_init.add_argument("--seed", type=int, default=None)
    realm_run = realm.add_parser("run", help="run the router")
    _add_config(realm_run)

    kas = sub.add_parser("kas", help="run the sign-on service").add_subparsers(
        dest="action", required=True
    )
    kas_run = kas.add_parser("run")
    _add_config(kas_run)

    tgs = sub.add_parser("tgs", help="run the authorization service").add_subparsers(
        dest="action", required=True
    )
    tgs_run = tgs.add_parser("run")
    _add_config(tgs_run)

    producer = sub.add_parser("producer", help="run a content producer").add_subparsers(
        dest="action", required=True
    )
    producer_run = producer.add_parser("run")
    producer_run.add_argument("label", help="producer section label from the config")
    producer_run.add_argument(
        "--mutual", action="store_true", default=None,
        help="require the challenge round regardless of the config",
    )
    _add_config(producer_run)

    consumer = sub.add_parser("consumer", help="fetch content").add_subparsers(
        dest="action", required=True
    )
    get = consumer.add_parser("get")
    get.add_argument("name", help="content name, e.g. /uni-x/cs/exams/final")
    get.add_argument("--uid", default="alice")
    get.add_argument(
        "--mutual", action="store_true",
        help="demand the challenge round for this fetch",
    )
    get.add_argument("--timeout", type=float, default=5.0)
    _add_config(get)

    admin = sub.add_parser("admin", help="edit the realm store files").add_subparsers(
        dest="action", required=True
    )
    add_user = admin.add_parser("add-user")
    add_user.add_argument("uid")
    group = add_user.add_mutually_exclusive_group(required=True)
    group.add_argument("--public-key", metavar="B64", help="base64 32-byte public key")
    group.add_argument("--password")
    _add_config(add_user)
    add_policy = admin.add_parser("add-policy")
    add_policy.add_argument("uid")
    add_policy.add_argument("namespace")
    _add_config(add_policy)
    register = admin.add_parser("register-producer")
    register.add_argument("namespace")
    register.add_argument("producer_name")
    _add_config(register)

    bench = sub.add_parser("bench", help="run a performance suite")
    bench.add_argument("which", choices=["caching", "handlers", "rtt"])
    bench.add_argument("--seed", type=int, default=None)
    bench.add_argument("--out", metavar="REPORT.JSON", default=None)
    bench.add_argument("--requests", type=int, default=None)
    bench.add_argument("--iterations", type=int, default=None)
    bench.add_argument("--size", type=int, default=None)
    bench.add_argument("--no-figures", action="store_true")

    return parser


def _serve_forever(label: str, address) -> None:
    print(f"{label} listening on {address[0]}:{address[1]}", file=sys.stderr)
    try:
        threading.Event().wait()
    except KeyboardInterrupt:
        pass


def _cmd_realm(args) -> int:
    if args.action == "init":
        path = realm_mod.init_realm(args.directory, seed=args.seed)
        print(f"realm written to {path}")
        return 0
    config = realm_mod.load_config(args.config)
    with realm_mod.serve_router(config) as router:
        _serve_forever("router", router.address)
    return 0


def _cmd_service(args, which: str) -> int:
    config = realm_mod.load_config(args.config)
    if which == "kas":
        service = realm_mod.serve_kas(config)
    elif which == "tgs":
        service = realm_mod.serve_tgs(config)
    else:
        service = realm_mod.serve_producer(config, args.label, mutual=args.mutual)
    with service:
        _serve_forever(which, service.address)
    return 0


def _cmd_consumer(args) -> int:
    config = realm_mod.load_config(args.config)
    client = realm_mod.socket_client(config, args.uid, timeout=args.timeout)
    if args.mutual:
        client.restricted = [
            dataclasses.replace(entry, mutual=True) for entry in client.restricted
        ]
    data = client.get(args.name)
    sys.stdout.buffer.write(data)
    sys.stdout.buffer.flush()
    print(
        f"\n{len(data)} bytes in {client.exchanges} exchange(s)", file=sys.stderr
    )
    return 0


def _cmd_admin(args) -> int:
    config = realm_mod.load_config(args.config)
    if args.action == "add-user":
        users = UserStore.load(config.users_path)
        if args.public_key:
            public = base64.b64decode(args.public_key, validate=True)
            users.add(args.uid, PkUser(public))
        else:
            salt = crypto.SystemRandom().bytes(16)
            key = crypto.password_to_key(args.password, salt)
            users.add(args.uid, PwdUser(salt=salt, key=key))
        users.save(config.users_path)
        print(f"user {args.uid} written to {config.users_path}")
    elif args.action == "add-policy":
        policies = PolicyStore.load(config.policies_path)
        policies.add(args.uid, parse_namespace(args.namespace))
        policies.save(config.policies_path)
        print(f"policy for {args.uid} written to {config.policies_path}")
    else:
        registry = ProducerRegistry.load(config.producers_path)
        k_p = crypto.random_key()
        registry.add(
            ProducerEntry(
                parse_namespace(args.namespace), parse_name(args.producer_name), k_p
            )
        )
        registry.save(config.producers_path)
        print(f"producer registered in {config.producers_path}")
    return 0


def _cmd_bench(args) -> int:
    kwargs = {"seed": args.seed}
    if args.requests is not None and args.which in ("caching", "rtt"):
        kwargs["requests"] = args.requests
    if args.iterations is not None and args.which == "handlers":
        kwargs["iterations"] = args.iterations
    if args.size is not None:
        kwargs["content_size"] = args.size
    report = bench_mod.run_bench(args.which, **kwargs)
    print(report.table())
    if args.out:
        written = report.save(args.out, figures=not args.no_figures)
        for path in written:
            print(f"wrote {path}", file=sys.stderr)
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "realm":
            return _cmd_realm(args)
        if args.command in ("kas", "tgs", "producer"):
            return _cmd_service(args, args.command)
        if args.command == "consumer":
            return _cmd_consumer(args)
        if args.command == "admin":
            return _cmd_admin(args)
        if args.command == "bench":
            return _cmd_bench(args)
    except NamegateError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
