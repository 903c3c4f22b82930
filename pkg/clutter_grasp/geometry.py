from __future__ import absolute_import, division

import math
from collections import namedtuple

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist
from scipy.spatial.transform import Rotation

from .core import ValidationError, normalize_seed


__all__ = ('Pose', 'ShapeDescriptor', 'PointCloud', 'wrap_angle',
           'sample_primitive_cloud', 'nearest_vector', 'nearest_vectors',
           'total_nn_distance', 'transform_cloud', 'transform_points')


TWO_PI = 2 * math.pi

# Number of extents per primitive kind
SHAPE_KINDS = {'box': 3, 'cylinder': 2, 'sphere': 1, 'compound': 0}


def wrap_angle(theta):
    """Wrap an angle into ``(-pi, pi]``.

    >>> wrap_angle(3 * math.pi / 2)
    -1.5707963267948966
    >>> wrap_angle(-math.pi)
    3.141592653589793
    """
    out = math.remainder(theta, TWO_PI)
    if out <= -math.pi:
        out += TWO_PI
    return out


def _as_triple(values, name):
    try:
        out = tuple(float(v) for v in values)
    except (TypeError, ValueError):
        raise ValidationError("%s must be a sequence of 3 numbers, got %r"
                              % (name, values))
    if len(out) != 3:
        raise ValidationError("%s must have 3 components, got %d"
                              % (name, len(out)))
    if not all(math.isfinite(v) for v in out):
        raise ValidationError("%s must be finite, got %r" % (name, out))
    return out


class Pose(namedtuple('Pose', ('position', 'orientation'))):
    """A rigid pose in the world frame.

    Parameters
    ----------
    position : sequence of float, optional
        ``(x, y, z)`` in meters. Default is the origin.
    orientation : sequence of float, optional
        ``(roll, pitch, yaw)`` in radians, applied as extrinsic rotations
        about x, y, then z. Each angle is wrapped into ``(-pi, pi]``.
    """
    __slots__ = ()

    def __new__(cls, position=(0.0, 0.0, 0.0), orientation=(0.0, 0.0, 0.0)):
        position = _as_triple(position, 'position')
        orientation = tuple(wrap_angle(a) for a in
                            _as_triple(orientation, 'orientation'))
        return super(Pose, cls).__new__(cls, position, orientation)

    @property
    def x(self):
        return self.position[0]

    @property
    def y(self):
        return self.position[1]

    @property
    def z(self):
        return self.position[2]

    @property
    def yaw(self):
        return self.orientation[2]

    @property
    def is_identity(self):
        return self == IDENTITY

    def rotation(self):
        return Rotation.from_euler('xyz', self.orientation)

    def matrix(self):
        """The 4x4 homogeneous transform of this pose."""
        out = np.eye(4)
        out[:3, :3] = self.rotation().as_matrix()
        out[:3, 3] = self.position
        return out

    @classmethod
    def from_matrix(cls, matrix):
        matrix = np.asarray(matrix, dtype=float)
        rpy = Rotation.from_matrix(matrix[:3, :3]).as_euler('xyz')
        return cls(matrix[:3, 3], rpy)

    def compose(self, other):
        """The pose of ``other`` expressed in this pose's frame."""
        if other.is_identity:
            return self
        if self.is_identity:
            return other
        return Pose.from_matrix(self.matrix().dot(other.matrix()))

    def inverse(self):
        if self.is_identity:
            return self
        rot = self.rotation().inv()
        return Pose(-rot.apply(self.position), rot.as_euler('xyz'))

    def apply(self, points):
        """Map points from this pose's frame into the world frame."""
        return transform_points(points, self)

    def translated(self, dx=0.0, dy=0.0, dz=0.0):
        x, y, z = self.position
        return Pose((x + dx, y + dy, z + dz), self.orientation)

    def with_orientation(self, roll=0.0, pitch=0.0, yaw=0.0):
        return Pose(self.position, (roll, pitch, yaw))


IDENTITY = Pose()


class ShapeDescriptor(namedtuple('ShapeDescriptor',
                                 ('kind', 'dimensions', 'parts'))):
    """A primitive (or two-primitive compound) object shape.

    Parameters
    ----------
    kind : {'box', 'cylinder', 'sphere', 'compound'}
        The shape kind.
    dimensions : sequence of float
        Extents in meters: ``(x, y, z)`` for a box, ``(radius, height)`` for
        a cylinder with its axis along z, ``(radius,)`` for a sphere. Empty
        for a compound.
    parts : sequence, optional
        For a compound only, pairs of ``(ShapeDescriptor, offset)`` where
        ``offset`` is the part center in the object frame.
    """
    __slots__ = ()

    def __new__(cls, kind, dimensions=(), parts=()):
        if kind not in SHAPE_KINDS:
            raise ValidationError("Unknown shape kind %r, expected one of %s"
                                  % (kind, ', '.join(sorted(SHAPE_KINDS))))
        if kind == 'compound':
            if dimensions:
                raise ValidationError("Compound shapes take no dimensions")
            if not parts:
                raise ValidationError("Compound shapes need at least one part")
            checked = []
            for part in parts:
                try:
                    shape, offset = part
                except (TypeError, ValueError):
                    raise ValidationError("Compound parts must be (shape, offset) "
                                          "pairs, got %r" % (part,))
                if not isinstance(shape, ShapeDescriptor) or shape.kind == 'compound':
                    raise ValidationError("Compound parts must be primitive shapes")
                checked.append((shape, _as_triple(offset, 'offset')))
            return super(ShapeDescriptor, cls).__new__(cls, kind, (),
                                                       tuple(checked))
        if parts:
            raise ValidationError("Only compound shapes take parts")
        try:
            dims = tuple(float(d) for d in dimensions)
        except (TypeError, ValueError):
            raise ValidationError("Invalid %s extents %r" % (kind, dimensions))
        if len(dims) != SHAPE_KINDS[kind]:
            raise ValidationError("A %s needs %d extents, got %d"
                                  % (kind, SHAPE_KINDS[kind], len(dims)))
        if not all(math.isfinite(d) and d > 0 for d in dims):
            raise ValidationError("Shape extents must be finite and strictly "
                                  "positive, got %r" % (dims,))
        return super(ShapeDescriptor, cls).__new__(cls, kind, dims, ())

    def _primitives(self):
        if self.kind == 'compound':
            return [(shape, np.array(offset)) for shape, offset in self.parts]
        return [(self, np.zeros(3))]

    def surface_area(self):
        return sum(area for area, _ in _faces(self))

    def z_extent(self):
        """The ``(min, max)`` z coordinate of the shape in its own frame."""
        lo, hi = [], []
        for shape, offset in self._primitives():
            if shape.kind == 'box':
                h = shape.dimensions[2] / 2
            elif shape.kind == 'cylinder':
                h = shape.dimensions[1] / 2
            else:
                h = shape.dimensions[0]
            lo.append(offset[2] - h)
            hi.append(offset[2] + h)
        return float(min(lo)), float(max(hi))

    def footprint_radius(self):
        """Radius of the disc used for planar contact between objects.

        Boxes use the disc with the same area as their x-y face.
        """
        out = 0.0
        for shape, offset in self._primitives():
            if shape.kind == 'box':
                r = math.sqrt(shape.dimensions[0] * shape.dimensions[1] / math.pi)
            else:
                r = shape.dimensions[0]
            out = max(out, math.hypot(offset[0], offset[1]) + r)
        return out

    def to_dict(self):
        if self.kind == 'compound':
            return {'shape': 'compound',
                    'parts': [dict(shape.to_dict(), offset=list(offset))
                              for shape, offset in self.parts]}
        return {'shape': self.kind, 'dimensions': list(self.dimensions)}

    @classmethod
    def from_dict(cls, data):
        try:
            kind = data['shape']
            if kind == 'compound':
                parts = [(cls.from_dict(p), p['offset']) for p in data['parts']]
                return cls(kind, parts=parts)
            return cls(kind, data['dimensions'])
        except (KeyError, TypeError) as e:
            raise ValidationError("Invalid shape description %r: %s" % (data, e))


def _box_face(dims, axis, sign):
    def sample(rng, k):
        out = rng.uniform(-0.5, 0.5, size=(k, 3)) * dims
        out[:, axis] = sign * dims[axis] / 2
        return out
    return sample


def _cylinder_side(r, h):
    def sample(rng, k):
        theta = rng.uniform(0, TWO_PI, size=k)
        z = rng.uniform(-h / 2, h / 2, size=k)
        return np.column_stack([r * np.cos(theta), r * np.sin(theta), z])
    return sample


def _cylinder_cap(r, z):
    def sample(rng, k):
        rho = r * np.sqrt(rng.uniform(0, 1, size=k))
        theta = rng.uniform(0, TWO_PI, size=k)
        return np.column_stack([rho * np.cos(theta), rho * np.sin(theta),
                                np.full(k, z)])
    return sample


def _sphere_surface(r):
    def sample(rng, k):
        v = rng.standard_normal(size=(k, 3))
        return r * v / np.linalg.norm(v, axis=1)[:, None]
    return sample


def _faces(shape):
    """List of ``(area, sampler)`` for every face of a shape, in fixed order."""
    faces = []
    for prim, offset in shape._primitives():
        if prim.kind == 'box':
            dims = np.array(prim.dimensions)
            sx, sy, sz = prim.dimensions
            areas = (sy * sz, sx * sz, sx * sy)
            prim_faces = [(areas[axis], _box_face(dims, axis, sign))
                          for axis in range(3) for sign in (1, -1)]
        elif prim.kind == 'cylinder':
            r, h = prim.dimensions
            prim_faces = [(TWO_PI * r * h, _cylinder_side(r, h)),
                          (math.pi * r * r, _cylinder_cap(r, h / 2)),
                          (math.pi * r * r, _cylinder_cap(r, -h / 2))]
        else:
            r = prim.dimensions[0]
            prim_faces = [(2 * TWO_PI * r * r, _sphere_surface(r))]
        for area, sampler in prim_faces:
            faces.append((area, _offset(sampler, offset)))
    return faces


def _offset(sampler, offset):
    if not offset.any():
        return sampler
    return lambda rng, k: sampler(rng, k) + offset


class PointCloud(object):
    """An immutable set of 3D points.

    Parameters
    ----------
    points : array_like
        An ``(n, 3)`` array of coordinates in meters.
    source : tuple, optional
        Provenance of the cloud, ``(shape, seed)`` for sampled clouds.
    """
    __slots__ = ('points', 'source', '_tree')

    def __init__(self, points, source=None):
        points = np.array(points, dtype=float)
        if points.size == 0:
            points = points.reshape(0, 3)
        if points.ndim != 2 or points.shape[1] != 3:
            raise ValidationError("Point clouds must have shape (n, 3), got %r"
                                  % (points.shape,))
        if not np.isfinite(points).all():
            raise ValidationError("Point clouds must have finite coordinates")
        points.setflags(write=False)
        self.points = points
        self.source = source
        self._tree = None

    def __repr__(self):
        return 'PointCloud<%d points>' % len(self)

    def __len__(self):
        return len(self.points)

    def __getitem__(self, index):
        return self.points[index]

    def __eq__(self, other):
        return (isinstance(other, PointCloud) and
                np.array_equal(self.points, other.points))

    def __ne__(self, other):
        return not self == other

    __hash__ = None

    @property
    def tree(self):
        """A KD-tree over the points, built on first use."""
        if self._tree is None:
            self._tree = cKDTree(self.points)
        return self._tree


def sample_primitive_cloud(shape, n, seed):
    """Sample points uniformly over the surface of a shape.

    Points are allocated to faces by a multinomial draw proportional to face
    area, then sampled uniformly on each face.

    Parameters
    ----------
    shape : ShapeDescriptor
        The shape to sample, centered on its own frame.
    n : int
        Number of points, at least 1.
    seed : int
        Seed for the random generator. The output is a pure function of
        ``(shape, n, seed)``.

    Returns
    -------
    cloud : PointCloud

    Examples
    --------
    >>> sphere = ShapeDescriptor('sphere', (0.04,))
    >>> sample_primitive_cloud(sphere, 1024, seed=7)
    PointCloud<1024 points>
    """
    if not isinstance(shape, ShapeDescriptor):
        raise ValidationError("Expected a ShapeDescriptor, got %r" % (shape,))
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise ValidationError("Point count must be a positive integer, got %r"
                              % (n,))
    n = int(n)
    faces = _faces(shape)
    areas = np.array([area for area, _ in faces])
    rng = np.random.default_rng(normalize_seed(seed))
    counts = rng.multinomial(n, areas / areas.sum())
    points = [sampler(rng, k) for (_, sampler), k in zip(faces, counts) if k]
    return PointCloud(np.concatenate(points), source=(shape, seed))


def _check_cloud(cloud):
    if len(cloud) == 0:
        raise ValidationError("Cannot query an empty point cloud")


def nearest_vectors(queries, cloud, accelerated=False):
    """Nearest cloud point for each of several query points.

    Parameters
    ----------
    queries : array_like
        A ``(k, 3)`` array of query points.
    cloud : PointCloud
        A non-empty cloud.
    accelerated : bool, optional
        Use the cloud's KD-tree instead of a linear scan. Results agree with
        the scan except possibly on exact distance ties.

    Returns
    -------
    vectors : np.ndarray
        ``(k, 3)`` vectors from each query to its nearest point.
    distances : np.ndarray
        ``(k,)`` Euclidean norms of ``vectors``.
    indices : np.ndarray
        ``(k,)`` indices of the nearest points. Ties go to the lowest index.
    """
    _check_cloud(cloud)
    queries = np.asarray(queries, dtype=float).reshape(-1, 3)
    if accelerated:
        _, indices = cloud.tree.query(queries)
    else:
        indices = np.argmin(cdist(queries, cloud.points), axis=1)
    vectors = cloud.points[indices] - queries
    distances = np.sqrt(np.einsum('ij,ij->i', vectors, vectors))
    return vectors, distances, indices


def nearest_vector(query, cloud):
    """The vector from ``query`` to its nearest point in ``cloud``.

    Returns
    -------
    vector : np.ndarray
    distance : float
    index : int
    """
    vectors, distances, indices = nearest_vectors([query], cloud)
    return vectors[0], float(distances[0]), int(indices[0])


def total_nn_distance(keypoints, cloud):
    """Sum over keypoints of the distance to the nearest cloud point."""
    keypoints = np.asarray(keypoints, dtype=float).reshape(-1, 3)
    if len(keypoints) == 0:
        raise ValidationError("At least one keypoint is required")
    _, distances, _ = nearest_vectors(keypoints, cloud)
    return float(distances.sum())


def transform_points(points, pose):
    points = np.asarray(points, dtype=float)
    if pose.is_identity:
        return points
    rot = pose.rotation().as_matrix()
    return points.dot(rot.T) + np.array(pose.position)


def transform_cloud(cloud, pose):
    """Rigidly move a cloud from ``pose``'s frame into the world frame."""
    if pose.is_identity:
        return cloud
    return PointCloud(transform_points(cloud.points, pose), source=cloud.source)
