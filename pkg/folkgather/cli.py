"""Command-line interface for folkgather."""

import argparse
import json
import logging
import sys
from pathlib import Path

import pandas as pd

from folkgather import __version__, __app_name__, DISPLAY_VERSION
from folkgather.classifier import (
    EXPERT, LabelFileOracle, classify_table, cross_validate, load_model, rank_features,
    read_labels, save_model, self_train, train, write_labels,
)
from folkgather.config import FIELD_NAMES, STRATEGIES, load_config, read_manifest, write_manifest
from folkgather.core import ingest_saplings, percent_expert, run_strategy
from folkgather.errors import EXIT_NOT_CONVERGED, FolkgatherError, InputError
from folkgather.evaluation import (
    compare_strategies, evaluate, pivot_reports, preference_sweep, reduce_tree_pair,
    reports_table, review_export, swap_sweep, write_sweep,
)
from folkgather.features import extract_features, read_features, write_features
from folkgather.folksonomy import (
    read_folksonomy, render_folksonomy, render_tree, write_folksonomy, write_tree_edges,
)
from folkgather.formats import FORMAT_NAMES, get_format
from folkgather.model import load_reference_taxonomy, stem, write_reference_taxonomy
from folkgather.rap import F_MODES, write_diagnostics
from folkgather.synth import SyntheticSpec, generate_synthetic, seed_term

logger = logging.getLogger(__name__)


def _float_list(text):
    try:
        return [float(v) for v in text.split(',') if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got '{text}'")


def _common_options():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        '--verbose', '-v', action='store_true',
        help='Verbose logging output'
    )
    common.add_argument(
        '--config', '-c', type=str, default=None, metavar='FILE',
        help='JSON file overriding the packaged defaults (CLI flags override both)'
    )
    common.add_argument(
        '--threads', '-t', type=int, default=None, metavar='N',
        help='Worker cap (default: physical core count); results do not depend on it'
    )
    return common


def _learning_options(parser):
    """RAP, similarity and snowball tunables shared by learn and sweep."""
    parser.add_argument(
        '--seed', '-s', dest='seed_term', type=str, default=None, metavar='TERM',
        help='Seed term; stemmed before matching sapling roots'
    )
    parser.add_argument(
        '--damping', type=float, default=None,
        help='Initial message damping lambda in [0, 1) (default: 0.5)'
    )
    parser.add_argument(
        '--max-sweeps', type=int, default=None,
        help='Sweep limit before reporting non-convergence (default: 2000)'
    )
    parser.add_argument(
        '--stable-window', type=int, default=None,
        help='Sweeps the exemplar set must stay unchanged to converge (default: 10)'
    )
    parser.add_argument(
        '--f-constraint', choices=F_MODES, default=None,
        help='Structural constraint variant (default: modified)'
    )
    parser.add_argument(
        '--no-polish', dest='polish', action='store_const', const=False, default=None,
        help='Skip the local improvement pass after message passing'
    )
    parser.add_argument(
        '--top-k', type=int, default=None,
        help='Tags per node compared for similarity (default: 40)'
    )
    parser.add_argument(
        '--divisor', type=float, default=None,
        help='Similarity divisor (default: 4)'
    )
    parser.add_argument(
        '--expert-multiplier', '-x', type=float, default=None,
        help='Expert preference multiplier for m3 (default: 2.0)'
    )
    parser.add_argument(
        '--max-rounds', type=int, default=None,
        help='Snowball sampling rounds (default: 5)'
    )
    parser.add_argument(
        '--output-dir', '-o', type=str, default=None, metavar='DIR',
        help='Directory for results (default: current directory)'
    )


def build_parser():
    parser = argparse.ArgumentParser(
        prog=__app_name__,
        description="Learn folksonomies from user-built saplings, weighting experts.",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""\
examples:
  %(prog)s synth --rng 7 -o data                         Synthetic corpus, labels, reference
  %(prog)s ingest data/corpus.json                       Validate a corpus, print counts
  %(prog)s features data/corpus.json -o feats.csv        Per-user feature table
  %(prog)s train-experts feats.csv labels.csv -m m.json  Train + 10-fold CV
  %(prog)s self-train feats.csv seed.csv --oracle all.csv -m m.json
  %(prog)s classify feats.csv m.json -o found.csv        Label every user
  %(prog)s learn data/corpus.json -s africa --strategy m3 -l labels.csv -o out
  %(prog)s evaluate out/africa-m3.json ref.tsv           LP / TO against a reference
  %(prog)s compare reports.csv m1 m3                     Paired t-test over seeds
  %(prog)s sweep preference corpus.json labels.csv ref.tsv -s africa
  %(prog)s review out/africa-m1.json out/africa-m3.json -o review.json
  %(prog)s rerun out/africa-m3.manifest.json             Replay a recorded run

strategies:
  m1   snowball sample, uniform preferences (mean similarity)
  m2   sample plus every expert sapling, uniform preferences
  m3   sample plus every expert sapling, expert preferences multiplied

exit status:
  0 ok, 2 input/model/oracle error, 3 RAP did not converge, 4 internal error""",
    )
    parser.add_argument(
        '--version', action='version',
        version=f'{__app_name__} {DISPLAY_VERSION} ({__version__})'
    )
    common = _common_options()
    sub = parser.add_subparsers(dest='command', metavar='COMMAND')

    p = sub.add_parser('ingest', parents=[common], help='Validate a corpus and print counts')
    p.add_argument('corpus', help='Corpus file (.json array or .jsonl)')
    p.add_argument('--format', '-f', dest='corpus_format', choices=FORMAT_NAMES, default=None,
                   help='Corpus format (default: from suffix)')
    p.set_defaults(handler=cmd_ingest)

    p = sub.add_parser('features', parents=[common], help='Extract per-user features')
    p.add_argument('corpus', help='Corpus file')
    p.add_argument('--format', '-f', dest='corpus_format', choices=FORMAT_NAMES, default=None,
                   help='Corpus format (default: from suffix)')
    p.add_argument('--output', '-o', type=str, default='features.csv',
                   help='Feature CSV to write (default: features.csv)')
    p.set_defaults(handler=cmd_features)

    p = sub.add_parser('train-experts', parents=[common],
                       help='Train the expert classifier and cross-validate it')
    p.add_argument('features', help='Feature CSV')
    p.add_argument('labels', help='Labels CSV (user_id,label)')
    p.add_argument('--model', '-m', type=str, default='model.json',
                   help='Model file to write (default: model.json)')
    p.add_argument('--reg', type=float, default=None, help='L2 regularization (default: 0.1)')
    p.add_argument('--folds', type=int, default=None, help='CV folds (default: 10)')
    p.add_argument('--rng', dest='rng_seed', type=int, default=None,
                   help='Fold shuffling seed (default: 0)')
    p.add_argument('--rank', type=str, default=None, metavar='CSV',
                   help='Also write the feature ranking table')
    p.set_defaults(handler=cmd_train_experts)

    p = sub.add_parser('self-train', parents=[common],
                       help='Grow the labeled set with an oracle and retrain')
    p.add_argument('features', help='Feature CSV (labeled users and pool)')
    p.add_argument('labels', help='Initial labels CSV')
    p.add_argument('--oracle', required=True, metavar='CSV',
                   help='Labels CSV answering oracle queries (re-read on every query)')
    p.add_argument('--model', '-m', type=str, default='model.json',
                   help='Final model file (default: model.json)')
    p.add_argument('--history', type=str, default='self-train-history.csv',
                   help='Per-iteration metrics CSV (default: self-train-history.csv)')
    p.add_argument('--labels-out', type=str, default=None, metavar='CSV',
                   help='Write the final labeled set')
    p.add_argument('--max-iter', type=int, default=None, help='Iterations (default: 8)')
    p.add_argument('--reg', type=float, default=None, help='L2 regularization (default: 0.1)')
    p.add_argument('--folds', type=int, default=None, help='CV folds (default: 10)')
    p.add_argument('--rng', dest='rng_seed', type=int, default=None,
                   help='Fold shuffling seed (default: 0)')
    p.set_defaults(handler=cmd_self_train)

    p = sub.add_parser('classify', parents=[common], help='Label every user with a model')
    p.add_argument('features', help='Feature CSV')
    p.add_argument('model', help='Model file')
    p.add_argument('--output', '-o', type=str, default=None, metavar='CSV',
                   help='Write user_id,label for every user')
    p.set_defaults(handler=cmd_classify)

    p = sub.add_parser('learn', parents=[common], help='Learn a folksonomy for a seed term')
    p.add_argument('corpus', help='Corpus file')
    p.add_argument('--format', '-f', dest='corpus_format', choices=FORMAT_NAMES, default=None,
                   help='Corpus format (default: from suffix)')
    p.add_argument('--strategy', choices=STRATEGIES, default=None,
                   help='Learning strategy (default: m3)')
    p.add_argument('--labels', '-l', type=str, default=None, metavar='CSV',
                   help='Expert labels (needed for m2/m3)')
    _learning_options(p)
    p.set_defaults(handler=cmd_learn)

    p = sub.add_parser('evaluate', parents=[common],
                       help='Score a learned folksonomy against a reference')
    p.add_argument('folksonomy', help='Folksonomy JSON written by learn')
    p.add_argument('reference', help='Reference taxonomy (parent<TAB>child lines)')
    p.add_argument('--labels', '-l', type=str, default=None, metavar='CSV',
                   help='Expert labels, for the %%EXP column')
    p.add_argument('--output', '-o', type=str, default=None, metavar='CSV',
                   help='Write the report row')
    p.add_argument('--append', '-a', action='store_true',
                   help='Append to --output instead of replacing it')
    p.set_defaults(handler=cmd_evaluate)

    p = sub.add_parser('compare', parents=[common],
                       help='Paired t-test of TO between two strategies')
    p.add_argument('reports', help='Report CSV with rows for both strategies')
    p.add_argument('first', choices=STRATEGIES, help='Baseline strategy')
    p.add_argument('second', choices=STRATEGIES, help='Compared strategy')
    p.add_argument('--table', type=str, default=None, metavar='CSV',
                   help='Write the per-seed pivot table')
    p.set_defaults(handler=cmd_compare)

    p = sub.add_parser('sweep', parents=[common], help='Robustness sweeps of m3')
    p.add_argument('axis', choices=('preference', 'swap'), help='Sweep axis')
    p.add_argument('corpus', help='Corpus file')
    p.add_argument('labels', help='Expert labels CSV')
    p.add_argument('reference', help='Reference taxonomy')
    p.add_argument('--values', type=_float_list, default=None, metavar='A,B,...',
                   help='Multipliers or swap percents (default: from config)')
    p.add_argument('--rng', dest='rng_seed', type=int, default=None,
                   help='Swap sampling seed (default: 0)')
    _learning_options(p)
    p.set_defaults(handler=cmd_sweep)

    p = sub.add_parser('synth', parents=[common],
                       help='Generate a synthetic corpus with planted experts')
    p.add_argument('spec', nargs='?', default=None,
                   help='JSON file overriding generator settings')
    p.add_argument('--rng', dest='rng_seed', type=int, default=None,
                   help='Generator seed (default: 0)')
    p.add_argument('--output-dir', '-o', type=str, default=None, metavar='DIR',
                   help='Directory for corpus.json, labels.csv, reference.tsv')
    p.set_defaults(handler=cmd_synth)

    p = sub.add_parser('review', parents=[common],
                       help='Reduce two learned trees and export review questions')
    p.add_argument('first', help='Folksonomy JSON (e.g. m1)')
    p.add_argument('second', help='Folksonomy JSON (e.g. m3)')
    p.add_argument('--max-children', type=int, default=10,
                   help='Children per segment (default: 10)')
    p.add_argument('--output', '-o', type=str, default='review.json',
                   help='Review JSON to write (default: review.json)')
    p.set_defaults(handler=cmd_review)

    p = sub.add_parser('rerun', parents=[common], help='Replay the command recorded in a manifest')
    p.add_argument('manifest', help='Manifest JSON written by learn, sweep or synth')
    p.set_defaults(handler=cmd_rerun)
    return parser


# --- helpers ----------------------------------------------------------------

def _config(args):
    overrides = {k: v for k, v in vars(args).items() if k in FIELD_NAMES}
    return load_config(args.config, overrides)


def _experts(path):
    if not path:
        return set()
    labels = read_labels(path)
    return set(labels.index[labels == EXPERT])


def _labeled_rows(table, labels):
    missing = [u for u in labels.index if u not in table.index]
    if missing:
        raise InputError(f"labeled user(s) missing from the feature table: "
                         f"{', '.join(missing[:5])}")
    return table.loc[labels.index]


def _output_dir(config):
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _print_report(report):
    print(f"  {report.seed} [{report.strategy or '-'}]  depth={report.depth}  "
          f"nodes={report.node_count}  LP={report.lp:.4f}  TO={report.to:.4f}  "
          f"TO(all)={report.to_all_terms:.4f}  %EXP={report.pct_expert:.2f}")


# --- subcommands ------------------------------------------------------------

def cmd_ingest(args):
    config = _config(args)
    corpus = ingest_saplings(config.corpus, config.corpus_format)
    summary = corpus.summary()
    unreachable = sum(s.unreachable for s in corpus.saplings.values())
    print(f"  users:    {summary['users']}")
    print(f"  saplings: {summary['saplings']}")
    print(f"  nodes:    {summary['nodes']}")
    if unreachable:
        print(f"  dropped:  {unreachable} unreachable node(s)")
    return 0


def cmd_features(args):
    config = _config(args)
    corpus = ingest_saplings(config.corpus, config.corpus_format)
    table = extract_features(corpus, threads=config.threads)
    write_features(table, args.output)
    print(f"  {len(table)} user(s) x {len(table.columns)} feature(s) -> {args.output}")
    return 0


def cmd_train_experts(args):
    config = _config(args)
    labels = read_labels(args.labels)
    X = _labeled_rows(read_features(args.features), labels)
    y = list(labels)
    model = train(X, y, reg=config.reg)
    save_model(model, args.model)
    p, r, f = cross_validate(X, y, folds=config.folds, seed=config.rng_seed, reg=config.reg,
                             threads=config.threads)
    print(f"  {len(y)} example(s), {y.count(EXPERT)} expert(s)")
    print(f"  cross-validation ({config.folds} folds): P={p:.4f}  R={r:.4f}  F={f:.4f}")
    print(f"  model -> {args.model}")
    if args.rank:
        ranking = rank_features(X, y, reg=config.reg)
        ranking.to_csv(args.rank, float_format='%.6f')
        top = ', '.join(ranking.index[:3])
        print(f"  ranking -> {args.rank} (top: {top})")
    return 0


def cmd_self_train(args):
    config = _config(args)
    table = read_features(args.features)
    initial = read_labels(args.labels)
    _labeled_rows(table, initial)
    state = self_train(table, initial.to_dict(), LabelFileOracle(args.oracle),
                       max_iter=config.max_iter, folds=config.folds, seed=config.rng_seed,
                       reg=config.reg, threads=config.threads)
    state.history_table().to_csv(args.history, index=False, float_format='%.6f')
    if state.model is not None:
        save_model(state.model, args.model)
    if args.labels_out:
        write_labels(dict(sorted(state.labels.items())), args.labels_out)
    print(f"  stopped: {state.stopped} after {len(state.history)} iteration(s)")
    print(f"  training examples: {state.training_size}, experts: {state.positives_found}")
    print(f"  history -> {args.history}, model -> {args.model}")
    if state.stopped == 'oracle':
        print(f"  oracle: {state.error}", file=sys.stderr)
    return 0


def cmd_classify(args):
    _config(args)
    model = load_model(args.model)
    table = read_features(args.features)
    result = classify_table(model, table)
    experts = list(result.index[result['label'] == EXPERT])
    if args.output:
        write_labels(result['label'].to_dict(), args.output)
    print(f"  {len(experts)} expert(s) among {len(result)} user(s)")
    for user_id in experts:
        print(f"    {user_id}  {result.at[user_id, 'score']:.4f}")
    return 0


def cmd_learn(args):
    config = _config(args)
    if not config.seed_term:
        raise InputError("learn needs a seed term (--seed)")
    experts = _experts(config.labels)
    if config.strategy != 'm1' and not experts:
        logger.warning(f"Strategy {config.strategy} without expert labels behaves like m1")
    corpus = ingest_saplings(config.corpus, config.corpus_format)
    outcome = run_strategy(corpus, config.seed_term, config.strategy, experts, config)

    out = _output_dir(config)
    base = f"{outcome.seed}-{config.strategy}"
    outputs = {
        'folksonomy': write_folksonomy(outcome.folksonomy, out / f"{base}.json"),
        'rendering': out / f"{base}.txt",
        'diagnostics': write_diagnostics(outcome.result, out / f"{base}.diagnostics.csv"),
    }
    outputs['rendering'].write_text(render_folksonomy(outcome.folksonomy), encoding='utf-8')
    if outcome.tree is not None:
        outputs['edges'] = write_tree_edges(outcome.tree, out / f"{base}.edges.tsv")
    write_manifest(out / f"{base}.manifest.json", args.argv, config, outputs)

    if outcome.tree is not None:
        print('\n'.join(render_tree(outcome.tree, indent=1)))
        print(f"\n  depth {outcome.tree.depth()}, {outcome.tree.size()} node(s), "
              f"%EXP {outcome.pct_expert:.2f}")
    for name, path in sorted(outputs.items()):
        print(f"  {name}: {path}")
    if not outcome.converged:
        print(f"  warning: RAP stopped after {outcome.result.sweeps} sweep(s) without converging",
              file=sys.stderr)
        return EXIT_NOT_CONVERGED
    return 0


def cmd_evaluate(args):
    _config(args)
    folksonomy = read_folksonomy(args.folksonomy)
    reference = load_reference_taxonomy(args.reference)
    pct = 0.0
    if args.labels and folksonomy.popular is not None:
        pct = percent_expert(folksonomy.popular, _experts(args.labels))
    report = evaluate(folksonomy, reference, seed=folksonomy.seed,
                      strategy=folksonomy.strategy, pct_expert=pct)
    _print_report(report)
    if args.output:
        table = reports_table([report])
        if args.append and Path(args.output).exists():
            table = pd.concat([pd.read_csv(args.output), table], ignore_index=True)
        table.to_csv(args.output, index=False, float_format='%.6f')
    return 0


def cmd_compare(args):
    _config(args)
    try:
        table = pd.read_csv(args.reports)
    except (OSError, ValueError) as e:
        raise InputError(f"{args.reports}: cannot read reports ({e})")
    wide = pivot_reports(table)
    if args.table:
        wide.to_csv(args.table, float_format='%.6f')
    per_seed = wide.drop(index='average')
    columns = [f"to_{args.first}", f"to_{args.second}"]
    for column in columns:
        if column not in per_seed:
            raise InputError(f"{args.reports}: no rows for strategy '{column[3:]}'")
    paired = per_seed[columns].dropna()
    result = compare_strategies(paired[columns[0]], paired[columns[1]])
    print(f"  TO {args.first}={result['mean_first']:.4f}  {args.second}={result['mean_second']:.4f}")
    print(f"  t({result['df']})={result['t']:.3f}, p={result['p']:.4f}")
    return 0


def cmd_sweep(args):
    config = _config(args)
    if not config.seed_term:
        raise InputError("sweep needs a seed term (--seed)")
    corpus = ingest_saplings(config.corpus, config.corpus_format)
    experts = _experts(config.labels)
    reference = load_reference_taxonomy(config.reference)
    if args.axis == 'preference':
        values = args.values if args.values is not None else config.multipliers
        result = preference_sweep(corpus, config.seed_term, experts, values, config, reference)
    else:
        values = args.values if args.values is not None else config.swap_percents
        result = swap_sweep(corpus, config.seed_term, experts, values, config, reference,
                            rng_seed=config.rng_seed)
    out = _output_dir(config)
    base = f"{stem(config.seed_term)}-{args.axis}-sweep"
    path = write_sweep(result, out / f"{base}.csv")
    write_manifest(out / f"{base}.manifest.json", args.argv, config, {'sweep': path})
    for value, to in result.points:
        print(f"  {value:>8g}  TO={to:.4f}")
    print(f"  sweep: {path}")
    return 0


def cmd_synth(args):
    config = _config(args)
    values = {}
    if args.spec:
        try:
            with open(args.spec, 'r', encoding='utf-8') as f:
                values = json.load(f)
        except (OSError, ValueError) as e:
            raise InputError(f"{args.spec}: cannot read generator settings ({e})")
        if not isinstance(values, dict):
            raise InputError(f"{args.spec}: generator settings must be a JSON object")
    if args.rng_seed is not None or 'rng_seed' not in values:
        values['rng_seed'] = config.rng_seed
    spec = SyntheticSpec.from_dict(values)
    records, labels, reference = generate_synthetic(spec)

    out = _output_dir(config)
    outputs = {
        'corpus': out / 'corpus.json',
        'labels': write_labels(labels, out / 'labels.csv'),
        'reference': write_reference_taxonomy(reference, out / 'reference.tsv'),
    }
    get_format('json').write_records(records, outputs['corpus'])
    write_manifest(out / 'synth.manifest.json', args.argv, config, outputs)
    experts = sum(1 for v in labels.values() if v == EXPERT)
    print(f"  {len(records)} user(s), {experts} expert(s), "
          f"{len(reference.names)} reference concept(s), seed term '{seed_term(reference)}'")
    for name, path in sorted(outputs.items()):
        print(f"  {name}: {path}")
    return 0


def cmd_review(args):
    _config(args)
    first, second = read_folksonomy(args.first), read_folksonomy(args.second)
    pair = reduce_tree_pair(first, second, max_children=args.max_children)
    seed = first.seed or (first.popular.label if first.popular else 'tree')
    items = review_export(pair, seed, first.strategy or 'first', second.strategy or 'second')
    with open(args.output, 'w', encoding='utf-8') as f:
        json.dump(items, f, indent=2)
        f.write('\n')
    print(f"  removed {pair.removed} of {pair.original_nodes} node(s) "
          f"({100 * pair.reduction:.1f}%), {len(items)} question(s) -> {args.output}")
    return 0


def cmd_rerun(args):
    manifest = read_manifest(args.manifest)
    command = manifest['command']
    if not command or command[0] == 'rerun':
        raise InputError(f"{args.manifest}: recorded command cannot be replayed")
    logger.info(f"Replaying: {' '.join(command)}")
    replay = build_parser().parse_args(command)
    replay.argv = list(command)
    return _execute(replay)


def _execute(args):
    """Run the selected subcommand; returns the exit status."""
    try:
        return args.handler(args)
    except FolkgatherError as e:
        print(e.one_line(), file=sys.stderr)
        return e.exit_status


def main(argv=None):
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    args = parser.parse_args(argv)

    # Configure logging
    level = logging.DEBUG if getattr(args, 'verbose', False) else logging.INFO
    logging.basicConfig(
        level=level,
        format='%(levelname)s: %(message)s',
    )

    if args.command is None:
        parser.print_help()
        sys.exit(2)

    args.argv = argv
    status = _execute(args)
    if status:
        sys.exit(status)
