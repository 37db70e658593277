package fx;

public class Square extends Shape {
    protected double side;

    public Square(double side) {
        super("square");
        this.side = side;
    }

    public double area() {
        return side * side;
    }

    public boolean isLarge() {
        return side > 10 ? true : false;
    }
}
