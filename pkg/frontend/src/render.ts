/**
 * Live mesh view. The streamed geometry is model-space; the view applies the
 * pose and a horizontal mirror flip (display concern only, the data stays
 * canonical). An orthographic camera matches the engine's projection model.
 */

import * as THREE from "three";
import type { ClientModel } from "./container.js";
import type { GeometryFrame } from "./protocol.js";
import { applyPose, frameShape } from "./reconstruct.js";

export class MirrorView {
  private renderer: THREE.WebGLRenderer;
  private scene: THREE.Scene;
  private camera: THREE.OrthographicCamera;
  private mesh: THREE.Mesh | null = null;
  private positions: THREE.BufferAttribute | null = null;
  private model: ClientModel | null = null;
  mirrored = true;

  constructor(private canvas: HTMLCanvasElement) {
    this.renderer = new THREE.WebGLRenderer({ canvas, antialias: true });
    this.renderer.setPixelRatio(window.devicePixelRatio);
    this.scene = new THREE.Scene();
    this.scene.background = new THREE.Color(0x101018);
    const half = 300;
    const aspect = canvas.clientWidth / Math.max(1, canvas.clientHeight);
    this.camera = new THREE.OrthographicCamera(
      -half * aspect, half * aspect, half, -half, -2000, 2000);
    this.camera.position.set(0, 0, 500);
    this.camera.lookAt(0, 0, 0);
    const key = new THREE.DirectionalLight(0xffffff, 2.2);
    key.position.set(0.4, 0.3, 1.0);
    this.scene.add(key, new THREE.AmbientLight(0x8890a8, 0.8));
  }

  setModel(model: ClientModel): void {
    this.model = model;
    const geometry = new THREE.BufferGeometry();
    this.positions = new THREE.BufferAttribute(new Float32Array(3 * model.nVertices), 3);
    this.positions.setUsage(THREE.DynamicDrawUsage);
    geometry.setAttribute("position", this.positions);
    geometry.setIndex(new THREE.BufferAttribute(model.topology.slice(), 1));
    const material = new THREE.MeshStandardMaterial({
      color: 0xc9a186, roughness: 0.75, metalness: 0.0, side: THREE.DoubleSide,
    });
    if (this.mesh) this.scene.remove(this.mesh);
    this.mesh = new THREE.Mesh(geometry, material);
    this.scene.add(this.mesh);
  }

  /** Render the latest frame: reconstruct, pose, mirror, shade. */
  showFrame(frame: GeometryFrame): void {
    if (!this.model || !this.mesh || !this.positions) return;
    const shape = frameShape(this.model, frame);
    const posed = applyPose(shape, frame.rotation, frame.scale, frame.translation);
    (this.positions.array as Float32Array).set(posed);
    this.positions.needsUpdate = true;
    this.mesh.geometry.computeVertexNormals();
    this.mesh.geometry.computeBoundingSphere();
    const sphere = this.mesh.geometry.boundingSphere;
    if (sphere) {
      this.mesh.position.set(-sphere.center.x, -sphere.center.y, 0);
    }
    // mirror in the view transform, never in the data
    this.mesh.scale.x = this.mirrored ? -1 : 1;
    this.draw();
  }

  /** Show a static neutral reconstruction (collective viewer). */
  showStaticShape(shape: ArrayLike<number>): void {
    if (!this.model || !this.mesh || !this.positions) return;
    const arr = this.positions.array as Float32Array;
    for (let i = 0; i < shape.length; i++) arr[i] = shape[i] as number;
    this.positions.needsUpdate = true;
    this.mesh.geometry.computeVertexNormals();
    this.mesh.geometry.computeBoundingSphere();
    const sphere = this.mesh.geometry.boundingSphere;
    if (sphere) this.mesh.position.set(-sphere.center.x, -sphere.center.y, 0);
    this.mesh.scale.x = 1;
    this.draw();
  }

  draw(): void {
    const w = this.canvas.clientWidth;
    const h = this.canvas.clientHeight;
    if (this.canvas.width !== w || this.canvas.height !== h) {
      this.renderer.setSize(w, h, false);
      const half = 300;
      const aspect = w / Math.max(1, h);
      this.camera.left = -half * aspect;
      this.camera.right = half * aspect;
      this.camera.updateProjectionMatrix();
    }
    this.renderer.render(this.scene, this.camera);
  }
}
