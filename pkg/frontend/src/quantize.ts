// Box quantization, kept in lockstep with the service so rendered box
// indices always equal the quantization of displayed meters.

export function boxIndex(distanceM: number, boxM: number): number {
  if (boxM <= 0) {
    throw new Error(`box size must be positive, got ${boxM}`);
  }
  return Math.max(Math.floor(distanceM / boxM), -2);
}

export function metersLabel(distanceM: number): string {
  return `${distanceM.toFixed(2)} m`;
}
