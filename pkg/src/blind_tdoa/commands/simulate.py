from __future__ import annotations

import logging
from pathlib import Path
from typing import TYPE_CHECKING

from pydantic import ValidationError

from blind_tdoa.bench import sub_seeds
from blind_tdoa.errors import UnsupportedFormat
from blind_tdoa.models import Geometry, NoiseSpec
from blind_tdoa.room_sim import ground_truth_tdoas, image_method_air, random_geometry, synthesize_observations
from blind_tdoa.signal_gen import db_to_ratio, inject_noise, make_source
from blind_tdoa.utils.formats import format_delay_matrix
from blind_tdoa.utils.serialization import (
    read_json,
    write_airs_binary,
    write_airs_csv,
    write_delay_matrix_csv,
    write_json,
    write_observations_binary,
    write_observations_csv,
)

from .common import HelpFormatter, add_room_options, draw_seed, output_dir, room_config

if TYPE_CHECKING:
    import argparse


log = logging.getLogger(__name__)


def _load_geometry(path: Path) -> Geometry:
    data = read_json(path)
    # Either a bare geometry or the geometry.json written by this command
    if isinstance(data, dict) and 'geometry' in data:
        data = data['geometry']
    try:
        return Geometry.model_validate(data)
    except ValidationError as exc:
        raise UnsupportedFormat(f'{path}: not a geometry ({exc.error_count()} schema errors)') from None


def run(args: argparse.Namespace) -> None:
    out = output_dir(args)
    room = room_config(args)
    seed = draw_seed(args.seed)
    geometry_seed, source_seed, noise_seed, _ = sub_seeds(seed)

    geom = _load_geometry(args.geometry) if args.geometry else random_geometry(room, args.n_mics, geometry_seed)
    channel_len = args.channel_len or room.max_first_order_delay() + 1
    s = db_to_ratio(args.db) if args.db is not None else args.s

    air = image_method_air(room, geom, channel_len)
    source = make_source(args.signal, args.length, source_seed, sample_rate=room.sample_rate)
    obs = inject_noise(synthesize_observations(air, source), NoiseSpec(s, noise_seed))
    tdoas = ground_truth_tdoas(air)

    write_airs_binary(air, out / 'airs.bin')
    write_airs_csv(air, out / 'airs.csv')
    write_observations_binary(obs, out / 'observations.bin')
    write_observations_csv(obs, out / 'observations.csv')
    write_delay_matrix_csv(tdoas, out / 'tdoa.csv')
    write_json(
        {
            'seed': seed,
            'signal': args.signal,
            's': s,
            'length': args.length,
            'channel_len': channel_len,
            'room': room.model_dump(mode='json'),
            'geometry': geom.model_dump(mode='json'),
        },
        out / 'geometry.json',
    )
    log.info(f'Simulated {geom.n_mics} microphones, {channel_len} taps, s={s:g}, into {out}')

    print('Ground-truth TDOAs (samples):')
    print(format_delay_matrix(tdoas))


def setup(subparsers: argparse._SubParsersAction[argparse.ArgumentParser]) -> None:
    parser = subparsers.add_parser(
        'simulate',
        help='simulate a room, its AIRs and noisy recordings',
        description='Draw a geometry, build first-order AIRs and write the noisy microphone recordings.',
        formatter_class=HelpFormatter,
    )
    parser.add_argument('--signal', default='white', help='source: white, pink or file:<path>')
    parser.add_argument('--n-mics', type=int, default=2, help='number of microphones')
    noise = parser.add_mutually_exclusive_group()
    noise.add_argument('--s', type=float, default=0.0, help='noise-to-signal RMS ratio')
    noise.add_argument('--db', type=float, help='signal-to-noise ratio in dB, instead of --s')
    parser.add_argument('--length', type=int, default=2048, help='source length K in samples')
    parser.add_argument(
        '--channel-len', type=int, help='AIR length L (default: one past the latest first-order tap of the room)'
    )
    parser.add_argument('--geometry', type=Path, help='JSON geometry to use instead of a random draw')
    parser.add_argument('--seed', type=int, help='master seed (default: fresh entropy, logged)')
    parser.add_argument('--out', type=Path, help='output directory (default: $BLIND_TDOA_OUTPUT_DIR)')
    add_room_options(parser)
    parser.set_defaults(handler=run, parser=parser)
