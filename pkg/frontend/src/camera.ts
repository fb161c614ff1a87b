/**
 * Pinhole camera math mirroring the service's conventions: the camera orbits
 * the origin (azimuth/elevation in degrees, distance), looks at the origin
 * with +z world up, camera space is x-right / y-down / z-forward, and the
 * continuous pixel origin is the top-left image corner with the world origin
 * projecting to (resolution/2, resolution/2).
 */

export type Vec3 = [number, number, number];

export interface ViewCamera {
  azimuth: number;
  elevation: number;
  distance: number;
  fovY: number;
  resolution: number;
}

const rad = (deg: number) => (deg * Math.PI) / 180;

function cross(a: Vec3, b: Vec3): Vec3 {
  return [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]];
}

function norm(a: Vec3): number {
  return Math.hypot(a[0], a[1], a[2]);
}

function scale(a: Vec3, s: number): Vec3 {
  return [a[0] * s, a[1] * s, a[2] * s];
}

function sub(a: Vec3, b: Vec3): Vec3 {
  return [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
}

function add(a: Vec3, b: Vec3): Vec3 {
  return [a[0] + b[0], a[1] + b[1], a[2] + b[2]];
}

export function focalPx(cam: ViewCamera): number {
  return (0.5 * cam.resolution) / Math.tan(rad(cam.fovY) / 2);
}

export function eyePosition(cam: ViewCamera): Vec3 {
  const az = rad(cam.azimuth);
  const el = rad(cam.elevation);
  return scale([Math.cos(el) * Math.cos(az), Math.cos(el) * Math.sin(az), Math.sin(el)], cam.distance);
}

/** Rows (right, down, forward) of the world-to-camera rotation. */
export function basis(cam: ViewCamera): [Vec3, Vec3, Vec3] {
  const eye = eyePosition(cam);
  const forward = scale(eye, -1 / norm(eye));
  const right0 = cross(forward, [0, 0, 1]);
  const right = scale(right0, 1 / norm(right0));
  const down = cross(forward, right);
  return [right, down, forward];
}

const dot = (a: Vec3, b: Vec3) => a[0] * b[0] + a[1] * b[1] + a[2] * b[2];

export function worldToCamera(cam: ViewCamera, p: Vec3): Vec3 {
  const [right, down, forward] = basis(cam);
  const d = sub(p, eyePosition(cam));
  return [dot(right, d), dot(down, d), dot(forward, d)];
}

/** Returns continuous pixel coordinates [u, v] and camera-space depth z. */
export function project(cam: ViewCamera, p: Vec3): { u: number; v: number; z: number } {
  const [x, y, z] = worldToCamera(cam, p);
  const f = focalPx(cam);
  return { u: (f * x) / z + cam.resolution / 2, v: (f * y) / z + cam.resolution / 2, z };
}

/** Inverse of project: continuous pixel coordinates plus depth to world space. */
export function unproject(cam: ViewCamera, u: number, v: number, z: number): Vec3 {
  const f = focalPx(cam);
  const xc = ((u - cam.resolution / 2) * z) / f;
  const yc = ((v - cam.resolution / 2) * z) / f;
  const [right, down, forward] = basis(cam);
  const world: Vec3 = [
    right[0] * xc + down[0] * yc + forward[0] * z,
    right[1] * xc + down[1] * yc + forward[1] * z,
    right[2] * xc + down[2] * yc + forward[2] * z,
  ];
  return add(world, eyePosition(cam));
}

export function pixelIndex(u: number, v: number): [number, number] {
  return [Math.floor(u), Math.floor(v)];
}
