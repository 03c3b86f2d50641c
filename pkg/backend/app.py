#!/usr/bin/env python3
"""
Flask API for Hénon Heights
Serves map evaluation, Green functions, heights and periodic points as JSON
"""

import sys
import os
import json
import logging
from datetime import datetime
from flask import Flask, jsonify, request
from flask_cors import CORS

# Add parent directory to path to import from src
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.arch_green import green, green_total
from src.config import ConfigError, resolve_config
from src.family_sweep import ExcludedParameterError
from src.heights import HeightCache, HeightPrecisionError, canonical_height
from src.henon_core import ComputationRefused, MapSpecError, MixedVariantError, format_rational, parse_map_spec, parse_point
from src.periodic import periodic_modp, rational_periodic_points

app = Flask(__name__)
CORS(app)  # Enable CORS for browser clients
app.logger.setLevel(logging.INFO)

# Global config and height cache
run_config = None
height_cache = None

MAX_API_PERIOD = 6


def get_config(force_reload=False):
    """Get or create the run config (henon_config.json < env)"""
    global run_config, height_cache
    if force_reload or run_config is None:
        config_path = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "henon_config.json")
        run_config = resolve_config(config_path)
        app.logger.info("✅ Config loaded: tol=%g, primes=%s", run_config.tol, run_config.primes)
        height_cache = HeightCache(run_config.cache_path) if run_config.cache_path else None
    return run_config


class BadRequest(ValueError):
    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


def _body():
    data = request.get_json(silent=True)
    if not isinstance(data, dict):
        raise BadRequest("request body must be a JSON object")
    return data


def _map_from(data):
    spec = data.get("map")
    if not isinstance(spec, dict):
        raise BadRequest("'map' must be a map specification object", field="map")
    return parse_map_spec(json.dumps(spec))


def _point_from(data, exact=False):
    text = data.get("point")
    if not isinstance(text, str):
        raise BadRequest("'point' must be a string like \"1/2,3\"", field="point")
    try:
        return parse_point(text, exact=True)
    except MapSpecError:
        if exact:
            raise
        return parse_point(text, exact=False)


def _int_from(data, name, default, lo, hi):
    value = data.get(name, default)
    if isinstance(value, bool) or not isinstance(value, int) or not lo <= value <= hi:
        raise BadRequest(f"'{name}' must be an integer between {lo} and {hi}", field=name)
    return value


def _error(e, status):
    payload = {"success": False, "error": str(e)}
    field = getattr(e, "field", None)
    if field:
        payload["field"] = field
    return jsonify(payload), status


def _handle(compute):
    """Run compute() inside the standard success/error envelope"""
    try:
        result = compute()
        return jsonify({"success": True, **result})
    except (BadRequest, MapSpecError, ExcludedParameterError, ConfigError, MixedVariantError) as e:
        app.logger.warning("⚠️  Rejected request: %s", e)
        return _error(e, 400)
    except (ComputationRefused, HeightPrecisionError) as e:
        app.logger.warning("⚠️  Refused computation: %s", e)
        return _error(e, 422)
    except Exception as e:
        app.logger.exception("Error handling %s", request.path)
        return _error(e, 500)


@app.route('/api/eval', methods=['POST'])
def eval_map():
    """Evaluate a map (or its inverse) along an orbit"""
    def compute():
        data = _body()
        f = _map_from(data)
        iterations = _int_from(data, "iterations", 1, 0, 10000)
        g = f.inverse() if data.get("inverse") else f
        orbit = g.orbit(_point_from(data), iterations)
        return {"map_hash": f.canonical_hash(), "orbit": [q.to_json() for q in orbit]}
    return _handle(compute)


@app.route('/api/jacobian', methods=['POST'])
def jacobian():
    """Jacobian determinant and dynamical degree"""
    def compute():
        f = _map_from(_body())
        return {"map_hash": f.canonical_hash(), "jacobian": format_rational(f.jacobian),
                "dynamical_degree": f.dynamical_degree}
    return _handle(compute)


@app.route('/api/green', methods=['POST'])
def green_value():
    """Archimedean Green function G+, G- or their maximum"""
    def compute():
        data = _body()
        config = get_config()
        f = _map_from(data)
        q = _point_from(data)
        direction = data.get("direction", "plus")
        if direction == "total":
            value = green_total(f, q, config.tol, config.n_max)
        elif direction in ("plus", "minus"):
            value = green(f, direction, q, config.tol, config.n_max)
        else:
            raise BadRequest("'direction' must be plus, minus or total", field="direction")
        return {"map_hash": f.canonical_hash(), "direction": direction, **value.to_dict()}
    return _handle(compute)


@app.route('/api/height', methods=['POST'])
def height():
    """Canonical height of a rational point"""
    def compute():
        data = _body()
        config = get_config()
        f = _map_from(data)
        q = _point_from(data, exact=True)
        value = canonical_height(f, q, config.tol, config.n_max, config.padic_max_iterates, config.padic_max_bits,
                                 cache=height_cache)
        return {"map_hash": f.canonical_hash(), "point": str(q), **value.to_dict()}
    return _handle(compute)


@app.route('/api/periodic', methods=['POST'])
def periodic():
    """Certified rational periodic points up to max_period, with mod-p cycle counts"""
    def compute():
        data = _body()
        config = get_config()
        f = _map_from(data)
        max_period = _int_from(data, "max_period", 2, 1, MAX_API_PERIOD)
        modp = [periodic_modp(f, p, max_period) for p in config.primes]
        points = rational_periodic_points(f, max_period, config.primes, config.height_bound)
        return {
            "map_hash": f.canonical_hash(),
            "max_period": max_period,
            "modp_cycle_counts": {str(s.prime): len(s.cycles) for s in modp},
            "rational_points": [q.to_json() for q in points],
        }
    return _handle(compute)


@app.route('/', methods=['GET'])
def root():
    """Root endpoint - lists available API endpoints"""
    return jsonify({
        "message": "Hénon Heights API",
        "endpoints": {
            "health": "/api/health",
            "eval": "/api/eval",
            "jacobian": "/api/jacobian",
            "green": "/api/green",
            "height": "/api/height",
            "periodic": "/api/periodic"
        }
    })


@app.route('/api/health', methods=['GET'])
def health():
    """Health check endpoint"""
    return jsonify({
        "status": "healthy",
        "timestamp": datetime.now().isoformat()
    })


if __name__ == '__main__':
    # Get port from environment variable (for production) or use default
    port = int(os.environ.get('PORT', 5001))
    debug = os.environ.get('FLASK_ENV') != 'production'
    app.run(debug=debug, port=port, host='0.0.0.0')
